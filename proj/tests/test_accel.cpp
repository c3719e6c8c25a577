/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The tvbf Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "tvbf/accel.hpp"
#include "tvbf/error.hpp"

using namespace tvbf;
using namespace tvbf::accel;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.input_channels = 4;
  c.patch_rows = 2;
  c.patches = 3;
  c.d_model = 4;
  c.heads = 2;
  c.mlp_width = 6;
  c.encoder_widths = {};
  c.decoder_widths = {5};
  c.embedding = Embedding::kPatch;
  return c;
}

ModelConfig line_config() {
  ModelConfig c;
  c.input_channels = 8;
  c.patch_rows = 4;
  c.patches = 5;
  c.d_model = 16;
  c.heads = 2;
  c.mlp_width = 24;
  c.encoder_widths = {20};
  c.decoder_widths = {12};
  c.embedding = Embedding::kLine;
  return c;
}

QMatrix random_units(std::size_t rows, std::size_t cols, std::int64_t span, Rng& rng) {
  QMatrix m(rows, cols);
  for (auto& v : m.data())
    v = static_cast<std::int64_t>(rng.bits() % static_cast<std::uint64_t>(2 * span + 1)) - span;
  return m;
}

// Chunked reference product built on qdot16.
QMatrix golden_product(const MatrixView& a, int pa, const MatrixView& b, int pb,
                       FixedFormat fmt) {
  QMatrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      std::int64_t acc = 0;
      for (std::size_t k0 = 0; k0 < a.cols; k0 += kLanes) {
        std::array<std::int64_t, kLanes> x{};
        std::array<std::int64_t, kLanes> y{};
        for (std::size_t l = 0; l < kLanes && k0 + l < a.cols; ++l) {
          x[l] = a.at(i, k0 + l);
          y[l] = b.at(k0 + l, j);
        }
        acc = qdot16(x, pa, y, pb, acc, fmt);
      }
      out(i, j) = acc;
    }
  return out;
}

QuantizedTensor as_tensor(const QMatrix& m, FixedFormat fmt) {
  QuantizedTensor t;
  t.units = m.data();
  t.fmt = fmt;
  t.rows = m.rows();
  t.cols = m.cols();
  return t;
}

}  // namespace

TEST_CASE("PE dot product") {
  const auto fmt = FixedFormat::make(20, 15);
  std::array<std::int64_t, kLanes> a{};
  std::array<std::int64_t, kLanes> b{};
  a.fill(1 << 6);
  b.fill(1 << 14);  // 0.5 at point 15
  CHECK(pe_dot16(a, b, 0, 6, 15, fmt) == 8 << 15);
  b.fill(1 << 15);
  CHECK(pe_dot16(a, b, 0, 6, 15, FixedFormat::make(24, 15)) == 16 << 15);
  a.fill(0);
  CHECK(pe_dot16(a, b, 777, 6, 15, fmt) == 777);

  Rng rng(1);
  for (int trial = 0; trial < 3000; ++trial) {
    for (auto& v : a) v = static_cast<std::int64_t>(rng.bits() % 256) - 128;
    for (auto& v : b) v = static_cast<std::int64_t>(rng.bits() % (1 << 20)) - (1 << 19);
    const std::int64_t acc = static_cast<std::int64_t>(rng.bits() % (1 << 20)) - (1 << 19);
    CHECK(pe_dot16(a, b, acc, 6, 15, fmt) == qdot16(a, 6, b, 15, acc, fmt));
  }
}

TEST_CASE("tile schedules") {
  for (auto [r, c, d] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 5, 17}, {8, 2, 48}, {7, 7, 16}}) {
    const auto s = make_schedule(r, c, d);
    CHECK(s.items.size() == r * c * ((d + 15) / 16));
    CHECK_NOTHROW(validate_schedule(s));
  }
  const auto base = make_schedule(3, 3, 40);
  auto gap = base;
  gap.items.erase(gap.items.begin() + 5);
  CHECK(test::error_kind([&] { validate_schedule(gap); }) == ErrorKind::kSchedule);
  auto overlap = base;
  overlap.items.push_back(overlap.items.front());
  CHECK(test::error_kind([&] { validate_schedule(overlap); }) == ErrorKind::kSchedule);
  auto order = base;
  std::swap(order.items[0], order.items[4]);  // slices of output 0 reversed
  CHECK(test::error_kind([&] { validate_schedule(order); }) == ErrorKind::kSchedule);
  auto range = base;
  range.items[0].col = 9;
  CHECK(test::error_kind([&] { validate_schedule(range); }) == ErrorKind::kSchedule);
  CHECK(test::error_kind([] { make_schedule(0, 1, 1); }) == ErrorKind::kArgument);
}

TEST_CASE("Q/K/V tiling") {
  const auto scheme = QuantScheme::hybrid1();
  const int fi = scheme.intermediate.frac_bits;
  Rng rng(2);

  SUBCASE("identity weights") {
    const auto x = random_units(4, 16, 1 << 14, rng);
    QMatrix eye(16, 16);
    for (std::size_t i = 0; i < 16; ++i) eye(i, i) = 1 << scheme.weights.frac_bits;
    const auto y = matmul_qkv(x, as_tensor(eye, scheme.weights), make_schedule(4, 16, 16), scheme);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(y.data()[i] == rescale(x.data()[i], fi, scheme.arith));
  }
  SUBCASE("single token, depth 16, one output") {
    QMatrix x(1, 16, 1 << fi);
    QMatrix w(16, 1, 1 << (scheme.weights.frac_bits - 2));  // 0.25 each
    const auto y = matmul_qkv(x, as_tensor(w, scheme.weights), make_schedule(1, 1, 16), scheme);
    CHECK(dequantize(y(0, 0), scheme.arith) == 4.0);
  }
  SUBCASE("random tile matches the chunked reference") {
    const auto x = random_units(5, 48, 1 << 15, rng);
    const auto w = as_tensor(random_units(48, 8, 127, rng), scheme.weights);
    std::uint64_t cycles = 0;
    const auto y = matmul_qkv(x, w, make_schedule(5, 8, 48), scheme, &cycles);
    CHECK(y == golden_product(MatrixView::of(x), fi, MatrixView::of(w), w.point(), scheme.arith));
    CHECK(cycles == 10 * 3);
  }
}

TEST_CASE("attention score and head output") {
  const auto scheme = QuantScheme::hybrid1();
  const int fi = scheme.intermediate.frac_bits;
  const int fs = scheme.softmax.frac_bits;
  Rng rng(3);

  const auto one = attention_score(random_units(1, 8, 1 << 14, rng),
                                   random_units(1, 8, 1 << 14, rng), scheme);
  CHECK(one(0, 0) == std::int64_t{1} << fs);

  const auto q = random_units(6, 8, 1 << 14, rng);
  const auto flat = attention_score(q, QMatrix(6, 8), scheme);
  for (std::size_t i = 0; i < 6; ++i) {
    std::int64_t sum = 0;
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(std::abs(dequantize(flat(i, j), scheme.softmax) - 1.0 / 6.0) <= 4 * scheme.softmax.ulp());
      sum += flat(i, j);
    }
    CHECK(sum == std::int64_t{1} << fs);
  }

  // agrees with float attention up to quantization
  const auto k = random_units(6, 8, 1 << 14, rng);
  const auto s = attention_score(q, k, scheme);
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<double> logit(6);
    double peak = -1e300;
    for (std::size_t j = 0; j < 6; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < 8; ++t)
        dot += dequantize(q(i, t), scheme.intermediate) * dequantize(k(j, t), scheme.intermediate);
      logit[j] = dot / std::sqrt(8.0);
      peak = std::max(peak, logit[j]);
    }
    double z = 0.0;
    for (double& v : logit) z += (v = std::exp(v - peak));
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(std::abs(dequantize(s(i, j), scheme.softmax) - logit[j] / z) <= 1e-3);
  }

  QMatrix eye(4, 4);
  for (std::size_t i = 0; i < 4; ++i) eye(i, i) = std::int64_t{1} << fs;
  const auto v = random_units(4, 3, 1 << 14, rng);
  const auto out = head_output(eye, v, scheme);
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(out.data()[i] == rescale(v.data()[i], fi, scheme.arith));
  const auto zero = head_output(QMatrix(4, 4), v, scheme, &out);
  CHECK(zero == out);
  CHECK(test::error_kind([&] { head_output(QMatrix(4, 5), v, scheme); }) == ErrorKind::kArgument);
}

TEST_CASE("simulator matches the golden model bit for bit") {
  for (const auto& c : {tiny_config(), line_config()}) {
    const auto w = random_weights(c, 41);
    const auto t = test::random_tensor(c.rows(), 4, c.input_channels, 43);
    for (const auto& name : {"hybrid1", "hybrid2", "q16", "q24"}) {
      const auto model = quantize_model(w, c, *QuantScheme::from_name(name));
      const auto sim = simulate_model(t, model);
      CHECK(sim.image == qforward_units(t, model));
      CHECK(sim.report.mac_ops == mac_count(c, 4));
      CHECK(sim.report.cycles * kPeCount * kLanesPerPe >= sim.report.mac_ops);
      const auto est = estimate_cycles(c, 4);
      CHECK(est.cycles == sim.report.cycles);
      CHECK(est.mac_ops == sim.report.mac_ops);
      REQUIRE(est.layers.size() == sim.report.layers.size());
      for (std::size_t i = 0; i < est.layers.size(); ++i) {
        CHECK(est.layers[i].name == sim.report.layers[i].name);
        CHECK(est.layers[i].cycles == sim.report.layers[i].cycles);
      }
    }
  }
}

TEST_CASE("cycle model") {
  // per line: encoder 3, two blocks of 245, decoder 4 + 3
  const auto c = tiny_config();
  const auto one = estimate_cycles(c, 1);
  CHECK(one.cycles == 500);
  CHECK(estimate_cycles(c, 2).cycles == 1000);
  CHECK(estimate_cycles(c, 7).cycles == 7 * one.cycles);
  const auto* score = [&]() -> const LayerCycles* {
    for (const auto& l : one.layers)
      if (l.name == "block.0.head.1.score") return &l;
    return nullptr;
  }();
  REQUIRE(score != nullptr);
  CHECK(score->cycles == 3 + (9 + kRsqrtLatency) + (9 + kSoftmaxLatency));
  CHECK(one.occupancy() > 0.0);
  CHECK(one.occupancy() <= 1.0);
  const auto text = one.to_text();
  CHECK(text.find("total.cycles = 500") != std::string::npos);
  CHECK(text.find("layer.block.1.mlp2.cycles") != std::string::npos);

  const auto shipped = ModelConfig::default_config();
  const auto frame = estimate_cycles(shipped, 128);
  CHECK(frame.mac_ops == mac_count(shipped, 128));
  CHECK(frame.cycles * kPeCount * kLanesPerPe >= frame.mac_ops);
}
