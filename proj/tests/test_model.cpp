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

#include <Eigen/Dense>
#include <cmath>

#include "test_support.hpp"
#include "tvbf/error.hpp"
#include "tvbf/model.hpp"

using namespace tvbf;

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

TofTensor tensor_for(const ModelConfig& c, std::size_t cols, std::uint64_t seed) {
  return test::random_tensor(c.rows(), cols, c.input_channels, seed);
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(-1, 1);
  return m;
}

DenseLayer random_dense(std::size_t in, std::size_t out, Rng& rng) {
  DenseLayer d{random_matrix(in, out, rng), std::vector<double>(out)};
  for (double& v : d.b) v = rng.uniform(-1, 1);
  return d;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

Eigen::MatrixXd affine(const Eigen::MatrixXd& x, const DenseLayer& d) {
  Eigen::MatrixXd y = x * to_eigen(d.w);
  for (Eigen::Index r = 0; r < y.rows(); ++r)
    for (Eigen::Index c = 0; c < y.cols(); ++c) y(r, c) += d.b[static_cast<std::size_t>(c)];
  return y;
}

// Attention written directly from the matrix formulas.
Eigen::MatrixXd attention_oracle(const Eigen::MatrixXd& x, const MultiHeadAttention& mha) {
  const Eigen::Index k = static_cast<Eigen::Index>(mha.heads.front().query.w.cols());
  Eigen::MatrixXd concat(x.rows(), k * static_cast<Eigen::Index>(mha.heads.size()));
  for (std::size_t h = 0; h < mha.heads.size(); ++h) {
    const auto q = affine(x, mha.heads[h].query);
    const auto kk = affine(x, mha.heads[h].key);
    const auto v = affine(x, mha.heads[h].value);
    Eigen::MatrixXd s = q * kk.transpose() / std::sqrt(double(k));
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const Eigen::RowVectorXd e = (s.row(r).array() - s.row(r).maxCoeff()).exp();
      s.row(r) = e / e.sum();
    }
    concat.middleCols(static_cast<Eigen::Index>(h) * k, k) = s * v;
  }
  return affine(concat, mha.output);
}

void expect_close(const Matrix& a, const Eigen::MatrixXd& b, double tol) {
  REQUIRE(a.rows() == static_cast<std::size_t>(b.rows()));
  REQUIRE(a.cols() == static_cast<std::size_t>(b.cols()));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      CHECK(std::abs(a(i, j) - b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) <= tol);
}

}  // namespace

TEST_CASE("dense layer") {
  Matrix x(2, 3);
  x.data() = {1, 2, 3, -4, 5, -6};
  DenseLayer id{Matrix(3, 3), {0, 0, 0}};
  for (std::size_t i = 0; i < 3; ++i) id.w(i, i) = 1.0;
  CHECK(dense_forward(x, id) == x);

  DenseLayer bias{Matrix(3, 2), {0.5, -1.5}};
  const auto y = dense_forward(Matrix(4, 3), bias);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(y(r, 0) == 0.5);
    CHECK(y(r, 1) == -1.5);
  }
  const auto relu = dense_forward(Matrix(1, 3), bias, Activation::kRelu);
  CHECK(relu(0, 1) == 0.0);

  Rng rng(3);
  const auto a = random_matrix(3, 4, rng);
  const auto d = random_dense(4, 2, rng);
  const auto out = dense_forward(a, d);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = d.b[j];
      for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * d.w(k, j);
      CHECK(out(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  CHECK(test::error_kind([&] { dense_forward(Matrix(2, 5), d); }) == ErrorKind::kArgument);
}

TEST_CASE("layer norm") {
  const LayerNormParams unit{{1, 1, 1, 1}, {0, 0, 0, 0}};
  Matrix flat(1, 4, 2.5);
  const auto normed = layer_norm(flat, unit, 1e-6);
  for (double v : normed.data()) CHECK(v == 0.0);

  Matrix pm(1, 2);
  pm.data() = {-1, 1};
  const auto n = layer_norm(pm, LayerNormParams{{1, 1}, {0, 0}}, 1e-15);
  CHECK(n(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(n(0, 1) == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t w = 2 + rng.bits() % 30;
    const double gamma = rng.uniform(0.5, 2.0);
    const double beta = rng.uniform(-1, 1);
    LayerNormParams p{std::vector<double>(w, gamma), std::vector<double>(w, beta)};
    const auto row = random_matrix(1, w, rng);
    const auto out = layer_norm(row, p, 1e-6);
    double mean = 0.0;
    for (double v : out.data()) mean += v;
    mean /= double(w);
    double var = 0.0;
    for (double v : out.data()) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / double(w));
    CHECK(std::abs(mean - beta) <= 1e-6);
    CHECK(std::abs(sd - gamma) <= 1e-6 * gamma * 10.0);
  }
}

TEST_CASE("softmax rows") {
  Matrix a(1, 2);
  const auto half = softmax_rows(a);
  CHECK(half(0, 0) == 0.5);
  CHECK(half(0, 1) == 0.5);

  Matrix b(1, 3);
  b.data() = {1, 2, 3};
  const auto p = softmax_rows(b);
  CHECK(p(0, 0) == doctest::Approx(0.09003057).epsilon(1e-6));
  CHECK(p(0, 1) == doctest::Approx(0.24472847).epsilon(1e-6));
  CHECK(p(0, 2) == doctest::Approx(0.66524096).epsilon(1e-6));

  Matrix shifted = b;
  for (double& v : shifted.data()) v += 123.0;
  const auto q = softmax_rows(shifted);
  for (std::size_t j = 0; j < 3; ++j) CHECK(q(0, j) == doctest::Approx(p(0, j)).epsilon(1e-12));

  Matrix huge = b;
  for (double& v : huge.data()) v += 1e300;
  const auto h = softmax_rows(huge);
  for (double v : h.data()) CHECK(std::isfinite(v));

  Rng rng(12);
  const auto r = random_matrix(20, 9, rng);
  const auto s = softmax_rows(r);
  for (std::size_t i = 0; i < 20; ++i) {
    double sum = 0.0;
    for (double v : s.row(i)) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("multi-head attention") {
  Rng rng(21);
  const auto make = [&](std::size_t d, std::size_t heads) {
    MultiHeadAttention m;
    const std::size_t k = d / heads;
    for (std::size_t h = 0; h < heads; ++h)
      m.heads.push_back({random_dense(d, k, rng), random_dense(d, k, rng), random_dense(d, k, rng)});
    m.output = random_dense(d, d, rng);
    return m;
  };

  SUBCASE("single token attends to itself") {
    const auto m = make(4, 2);
    const auto x = random_matrix(1, 4, rng);
    Eigen::MatrixXd v(1, 4);
    v << affine(to_eigen(x), m.heads[0].value), affine(to_eigen(x), m.heads[1].value);
    expect_close(mha_forward(x, m), affine(v, m.output), 1e-12);
  }
  SUBCASE("zero values leave the output bias") {
    auto m = make(4, 2);
    for (auto& h : m.heads) {
      h.value.w = Matrix(4, 2);
      h.value.b = {0, 0};
    }
    const auto out = mha_forward(random_matrix(3, 4, rng), m);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(out(i, j) == doctest::Approx(m.output.b[j]));
  }
  SUBCASE("matches the matrix formulas") {
    for (int trial = 0; trial < 5; ++trial) {
      const auto m = make(4, 2);
      const auto x = random_matrix(3, 4, rng);
      expect_close(mha_forward(x, m), attention_oracle(to_eigen(x), m), 1e-12);
    }
  }
}

TEST_CASE("transformer block") {
  const auto c = tiny_config();
  auto w = zero_weights(c);
  Rng rng(5);
  const auto x = random_matrix(3, 4, rng);
  CHECK(transformer_block(x, w.blocks[0], c.norm_epsilon) == x);
  CHECK(transformer_block(Matrix(3, 4), w.blocks[0], c.norm_epsilon) == Matrix(3, 4));

  const auto rw = random_weights(c, 9);
  const auto& b = rw.blocks[1];
  const Matrix u = [&] {
    Matrix a = mha_forward(layer_norm(x, b.norm1, c.norm_epsilon), b.attention);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += x.data()[i];
    return a;
  }();
  Matrix y = dense_forward(
      dense_forward(layer_norm(u, b.norm2, c.norm_epsilon), b.mlp1, Activation::kRelu), b.mlp2);
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += u.data()[i];
  CHECK(transformer_block(x, b, c.norm_epsilon) == y);
}

TEST_CASE("full forward pass") {
  for (const auto embedding : {Embedding::kPatch, Embedding::kLine}) {
    auto c = tiny_config();
    c.embedding = embedding;
    const auto t = tensor_for(c, 5, 31);
    const auto w = random_weights(c, 4);
    const auto iq = vbf_forward(t, w, c);
    CHECK(iq.pixels.rows() == c.rows());
    CHECK(iq.pixels.cols() == 5);
    CHECK(iq.grid == t.grid);

    // one lateral line alone gives the same column
    TofTensor line = TofTensor::zeros(make_grid(0.01, 0.02, c.rows(), 0.0, 0.0, 1), t.geometry);
    for (std::size_t x = 0; x < c.rows(); ++x)
      for (std::size_t ch = 0; ch < c.input_channels; ++ch) line.at(x, 0, ch) = t.at(x, 3, ch);
    const auto single = vbf_forward(line, w, c);
    for (std::size_t x = 0; x < c.rows(); ++x) CHECK(single.pixels(x, 0) == iq.pixels(x, 3));

    // zero biases and a zero tensor give a zero image
    auto zb = w;
    for_each_tensor(zb, [](const std::string& name, std::size_t, std::size_t,
                           std::vector<double>& data) {
      if (name.find("bias") != std::string::npos || name.find("beta") != std::string::npos)
        std::fill(data.begin(), data.end(), 0.0);
    });
    const auto zero = vbf_forward(TofTensor::zeros(t.grid, t.geometry), zb, c);
    for (const auto& p : zero.pixels.data()) CHECK(p == std::complex<double>{});
  }
  auto c = tiny_config();
  const auto wrong = test::random_tensor(c.rows() + 1, 2, c.input_channels, 1);
  CHECK(test::error_kind([&] { vbf_forward(wrong, random_weights(c, 1), c); }) ==
        ErrorKind::kArgument);
}

TEST_CASE("parameter and operation counts") {
  const auto c = tiny_config();
  CHECK(param_count(c) == 393);
  CHECK(mac_count(c, 1) == 1032);
  const auto grid = make_grid(0.01, 0.02, c.rows(), -0.001, 0.001, 4);
  CHECK(flops_count(c, grid) == 4 * 2136);
  const auto wide = make_grid(0.01, 0.02, c.rows(), -0.001, 0.001, 8);
  CHECK(flops_count(c, wide) == 2 * flops_count(c, grid));

  // counts agree with the stored tensors
  auto w = zero_weights(c);
  std::uint64_t stored = 0;
  for_each_tensor(w, [&](const std::string&, std::size_t r, std::size_t k,
                         std::vector<double>& data) {
    CHECK(data.size() == r * k);
    stored += data.size();
  });
  CHECK(stored == param_count(c));

  auto shipped = ModelConfig::default_config();
  auto ws = zero_weights(shipped);
  stored = 0;
  for_each_tensor(ws, [&](const std::string&, std::size_t, std::size_t,
                          std::vector<double>& data) { stored += data.size(); });
  CHECK(stored == param_count(shipped));
}

TEST_CASE("shipped budgets") {
  const auto c = ModelConfig::default_config();
  const double params = static_cast<double>(param_count(c));
  CHECK(std::abs(params - 1507922.0) / 1507922.0 <= 0.01);
  const auto grid = grid_preset("frame", ProbeGeometry::default_preset(), AcquisitionParams{});
  const double ops = static_cast<double>(flops_count(c, grid));
  CHECK(std::abs(ops - 0.34e9) / 0.34e9 <= 0.20);
  CHECK(ModelConfig::load(TVBF_SOURCE_DIR "/configs/tiny_vbf_default.cfg") == c);
}

TEST_CASE("config text round trip and validation") {
  auto c = tiny_config();
  c.encoder_widths = {7, 3};
  c.norm_epsilon = 3.25e-5;
  CHECK(ModelConfig::parse(c.to_text()) == c);
  CHECK(test::error_kind([] { ModelConfig::parse("d_model = 6\nheads = 4\n"); }) ==
        ErrorKind::kConfig);
  CHECK(test::error_kind([] { ModelConfig::parse("embedding = conv\n"); }) == ErrorKind::kConfig);
  CHECK(test::error_kind([] { ModelConfig::parse("patches = many\n"); }) == ErrorKind::kConfig);
}

TEST_CASE("TVBF weight container") {
  const auto dir = test::scratch("tvbf");
  auto c = tiny_config();
  c.encoder_widths = {6};
  const auto w = random_weights(c, 77);
  save_weights(w, c, dir / "a.tvbf");
  const auto loaded = load_weights(dir / "a.tvbf");
  CHECK(loaded.config == c);
  auto a = w;
  auto b = loaded.weights;
  std::vector<std::vector<double>> ta;
  std::vector<std::vector<double>> tb;
  for_each_tensor(a, [&](const std::string&, std::size_t, std::size_t, std::vector<double>& d) {
    ta.push_back(d);
  });
  for_each_tensor(b, [&](const std::string&, std::size_t, std::size_t, std::vector<double>& d) {
    tb.push_back(d);
  });
  CHECK(ta == tb);
  save_weights(loaded.weights, loaded.config, dir / "b.tvbf");
  CHECK(test::read_bytes(dir / "a.tvbf") == test::read_bytes(dir / "b.tvbf"));

  auto bytes = test::read_bytes(dir / "a.tvbf");
  auto bad = bytes;
  bad[1] = 'X';
  test::write_bytes(dir / "magic.tvbf", bad);
  CHECK(test::error_kind([&] { load_weights(dir / "magic.tvbf"); }) == ErrorKind::kFormat);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  test::write_bytes(dir / "cut.tvbf", cut);
  CHECK(test::error_kind([&] { load_weights(dir / "cut.tvbf"); }) == ErrorKind::kCorruption);
  auto extra = bytes;
  extra.push_back(0);
  test::write_bytes(dir / "extra.tvbf", extra);
  CHECK(test::error_kind([&] { load_weights(dir / "extra.tvbf"); }) == ErrorKind::kCorruption);

  CHECK(test::error_kind([&] { save_weights(w, tiny_config(), dir / "mismatch.tvbf"); }) ==
        ErrorKind::kArgument);
}

TEST_CASE("seeded random weights are reproducible") {
  const auto c = tiny_config();
  auto a = random_weights(c, 5);
  auto b = random_weights(c, 5);
  auto d = random_weights(c, 6);
  std::vector<double> fa;
  std::vector<double> fb;
  std::vector<double> fd;
  const auto flat = [](std::vector<double>& into) {
    return [&into](const std::string&, std::size_t, std::size_t, std::vector<double>& data) {
      into.insert(into.end(), data.begin(), data.end());
    };
  };
  for_each_tensor(a, flat(fa));
  for_each_tensor(b, flat(fb));
  for_each_tensor(d, flat(fd));
  CHECK(fa == fb);
  CHECK(fa != fd);
  for (double v : fa) CHECK(static_cast<double>(static_cast<float>(v)) == v);
}
