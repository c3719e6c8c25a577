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


#include "tvbf/quant.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "tvbf/error.hpp"

namespace tvbf {

namespace {

__extension__ using Int128 = __int128;

constexpr std::int64_t kInt64Max = std::numeric_limits<std::int64_t>::max();
constexpr std::int64_t kInt64Min = std::numeric_limits<std::int64_t>::min();

std::int64_t floor_div(std::int64_t num, std::int64_t den) {
  std::int64_t q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return q;
}

// Entry k holds exp(-k/16) at the requested fractional precision.
constexpr int kExpTableSize = 256;
constexpr int kExpStepBits = 4;  // table step 2^-4
constexpr int kMaxFrac = 40;

using ExpTable = std::array<std::int64_t, kExpTableSize>;

const ExpTable& exp_table(int frac_bits) {
  static const auto tables = [] {
    std::array<ExpTable, kMaxFrac + 1> all{};
    for (int f = 0; f <= kMaxFrac; ++f)
      for (int k = 0; k < kExpTableSize; ++k)
        all[f][k] = static_cast<std::int64_t>(
            std::llround(std::ldexp(std::exp(-k / 16.0), f)));
    return all;
  }();
  return tables[static_cast<std::size_t>(frac_bits)];
}

// Linear seed for 1/sqrt(m), m in [1, 4), in Q2.30: 1.06638627 - 0.1523409 m.
constexpr int kSeedBits = 30;
constexpr std::int64_t kSeedC0 = 1145023539;
constexpr std::int64_t kSeedC1 = 163574796;

}  // namespace

FixedFormat FixedFormat::make(int total_bits, int frac_bits) {
  require(total_bits >= 4 && total_bits <= 32, ErrorKind::kArgument,
          "fixed-point width must lie in [4, 32]");
  require(frac_bits >= 0 && frac_bits <= total_bits - 1, ErrorKind::kArgument,
          "fractional bits must lie in [0, total - 1]");
  return FixedFormat{total_bits, frac_bits};
}

double FixedFormat::ulp() const { return std::ldexp(1.0, -frac_bits); }

QuantScheme QuantScheme::uniform(int bits) {
  QuantScheme s;
  s.name = "q" + std::to_string(bits);
  s.weights = FixedFormat::make(bits, bits - 2);
  s.softmax = FixedFormat::make(bits, bits - 2);
  s.arith = FixedFormat::make(bits, bits - 5);
  s.intermediate = FixedFormat::make(bits, bits - 5);
  return s;
}

QuantScheme QuantScheme::hybrid1() {
  return QuantScheme{"hybrid1", FixedFormat::make(8, 6), FixedFormat::make(24, 22),
                     FixedFormat::make(20, 15), FixedFormat::make(20, 15)};
}

QuantScheme QuantScheme::hybrid2() {
  return QuantScheme{"hybrid2", FixedFormat::make(8, 6), FixedFormat::make(24, 22),
                     FixedFormat::make(16, 11), FixedFormat::make(16, 11)};
}

std::optional<QuantScheme> QuantScheme::from_name(const std::string& name) {
  if (name == "float") return std::nullopt;
  if (name == "q24") return uniform(24);
  if (name == "q20") return uniform(20);
  if (name == "q16") return uniform(16);
  if (name == "hybrid1") return hybrid1();
  if (name == "hybrid2") return hybrid2();
  fail(ErrorKind::kConfig, "unknown quantization scheme: " + name);
}

const std::vector<std::string>& scheme_names() {
  static const std::vector<std::string> names{"float", "q24",     "q20",
                                              "q16",   "hybrid1", "hybrid2"};
  return names;
}

std::int64_t saturate(std::int64_t units, FixedFormat fmt) {
  return std::clamp(units, fmt.min_units(), fmt.max_units());
}

std::int64_t quantize(double x, FixedFormat fmt) {
  require(std::isfinite(x), ErrorKind::kData, "cannot quantize a non-finite value");
  const double y = std::ldexp(x, fmt.frac_bits);
  if (y >= static_cast<double>(fmt.max_units())) return fmt.max_units();
  if (y <= static_cast<double>(fmt.min_units())) return fmt.min_units();
  const double lo = std::floor(y);
  const double diff = y - lo;
  auto units = static_cast<std::int64_t>(lo);
  if (diff > 0.5 || (diff == 0.5 && (units & 1) != 0)) ++units;
  return saturate(units, fmt);
}

double dequantize(std::int64_t units, FixedFormat fmt) {
  return std::ldexp(static_cast<double>(units), -fmt.frac_bits);
}

double dequantize_at(std::int64_t units, int point) {
  return std::ldexp(static_cast<double>(units), -point);
}

std::int64_t round_shift(std::int64_t value, int shift) {
  if (shift > 0) {
    if (shift > 62) return 0;
    return (value + (std::int64_t{1} << (shift - 1))) >> shift;
  }
  const int left = -shift;
  if (value == 0 || left == 0) return value;
  if (left >= 63) return value > 0 ? kInt64Max : kInt64Min;
  if (value > (kInt64Max >> left)) return kInt64Max;
  if (value < (kInt64Min >> left)) return kInt64Min;
  return value * (std::int64_t{1} << left);
}

std::int64_t rescale(std::int64_t value, int from_point, FixedFormat to) {
  return saturate(round_shift(value, from_point - to.frac_bits), to);
}

std::int64_t qadd(std::int64_t a, std::int64_t b, FixedFormat fmt) {
  return saturate(a + b, fmt);
}

std::int64_t qmul(std::int64_t a, int pa, std::int64_t b, int pb, FixedFormat out) {
  return rescale(a * b, pa + pb, out);
}

std::int64_t div_round(std::int64_t num, std::int64_t den) {
  require(den > 0, ErrorKind::kDomain, "division by a non-positive value");
  return floor_div(2 * num + den, 2 * den);
}

std::int64_t qdot16(std::span<const std::int64_t, kLanes> a, int pa,
                    std::span<const std::int64_t, kLanes> b, int pb,
                    std::int64_t acc, FixedFormat out) {
  std::array<std::int64_t, kLanes> level{};
  for (std::size_t i = 0; i < kLanes; ++i) level[i] = a[i] * b[i];
  for (std::size_t width = kLanes / 2; width >= 1; width /= 2)
    for (std::size_t i = 0; i < width; ++i) level[i] = level[2 * i] + level[2 * i + 1];
  return qadd(acc, rescale(level[0], pa + pb, out), out);
}

std::vector<std::int64_t> qsoftmax(std::span<const std::int64_t> row, FixedFormat in,
                                   FixedFormat out) {
  require(!row.empty(), ErrorKind::kArgument, "softmax of an empty row");
  require(out.frac_bits <= kMaxFrac, ErrorKind::kArgument, "softmax format too fine");
  const auto& table = exp_table(out.frac_bits);
  const std::int64_t peak = *std::max_element(row.begin(), row.end());
  const int shift = in.frac_bits - kExpStepBits;

  std::vector<std::int64_t> e(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    const std::int64_t u = peak - row[i];  // -(x - max) >= 0
    std::int64_t k = 0;
    std::int64_t rem = 0;
    if (shift >= 0) {
      k = u >> shift;
      rem = u & ((std::int64_t{1} << shift) - 1);
    } else {
      k = round_shift(u, shift);
    }
    if (k >= kExpTableSize - 1) {
      e[i] = (k == kExpTableSize - 1 && rem == 0) ? table[kExpTableSize - 1] : 0;
    } else {
      const std::int64_t drop = table[k] - table[k + 1];
      e[i] = table[k];
      if (shift > 0) {
        // chord minus the curvature term table[k] * t (1 - t) / 512, t = rem / 2^shift
        const Int128 bend = static_cast<Int128>(table[k]) * rem *
                            ((std::int64_t{1} << shift) - rem);
        const int bend_shift = 2 * shift + 2 * kExpStepBits + 1;
        const auto bend_units = static_cast<std::int64_t>(
            (bend + (static_cast<Int128>(1) << (bend_shift - 1))) >> bend_shift);
        e[i] -= bend_units + round_shift(drop * rem, shift);
      }
    }
  }

  std::int64_t sum = 0;
  for (auto v : e) sum += v;
  std::vector<std::int64_t> p(row.size());
  std::int64_t cumulative = 0;
  std::int64_t previous = 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    cumulative += e[i];
    const Int128 num = static_cast<Int128>(cumulative) << out.frac_bits;
    const auto scaled = static_cast<std::int64_t>((2 * num + sum) / (2 * static_cast<Int128>(sum)));
    p[i] = saturate(scaled - previous, out);
    previous = scaled;
  }
  return p;
}

std::int64_t qsqrt_recip(std::int64_t x, FixedFormat in, FixedFormat out) {
  require(x > 0, ErrorKind::kDomain, "reciprocal square root of a non-positive value");
  const int msb = 63 - std::countl_zero(static_cast<std::uint64_t>(x));
  const int exponent = msb - in.frac_bits;  // x in [2^e, 2^(e+1))
  const int even = exponent - (((exponent % 2) + 2) % 2);
  const int shift = kSeedBits - in.frac_bits - even;
  const std::int64_t m = shift >= 0 ? x << shift : x >> -shift;  // [1, 4) in Q2.30

  std::int64_t y = kSeedC0 - ((kSeedC1 * m) >> kSeedBits);
  for (int i = 0; i < 3; ++i) {
    const std::int64_t y2 = (y * y) >> kSeedBits;
    const std::int64_t t = (m * y2) >> kSeedBits;
    y = (y * ((std::int64_t{3} << kSeedBits) - t)) >> (kSeedBits + 1);
  }
  return saturate(round_shift(y, kSeedBits + even / 2 - out.frac_bits), out);
}

std::int64_t qsqrt_recip(std::int64_t x, FixedFormat fmt) {
  return qsqrt_recip(x, fmt, fmt);
}

NormFormats norm_formats(FixedFormat arith) {
  const auto widest = [](int int_bits, int frac_bits) {
    const int total = std::min(32, int_bits + frac_bits);
    return FixedFormat::make(total, total - int_bits);
  };
  return {widest(9, std::min(2 * arith.frac_bits, 23)), widest(arith.frac_bits / 2 + 3, arith.frac_bits)};
}

QuantizedTensor quantize_tensor(std::span<const double> values, std::size_t rows,
                                std::size_t cols, FixedFormat fmt, bool pow2_scale) {
  require(values.size() == rows * cols, ErrorKind::kArgument,
          "tensor size does not match shape");
  QuantizedTensor t;
  t.fmt = fmt;
  t.rows = rows;
  t.cols = cols;
  if (pow2_scale) {
    double peak = 0.0;
    for (double v : values) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) std::frexp(peak, &t.exponent);
  }
  t.units.reserve(values.size());
  for (double v : values) t.units.push_back(quantize(std::ldexp(v, -t.exponent), fmt));
  return t;
}

}  // namespace tvbf
