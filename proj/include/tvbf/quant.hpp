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


#ifndef TVBF_QUANT_HPP
#define TVBF_QUANT_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tvbf/array.hpp"

namespace tvbf {

/// Signed two's-complement fixed point: value = units * 2^-frac_bits,
/// units saturated to [-2^(total-1), 2^(total-1) - 1].
struct FixedFormat {
  int total_bits = 16;
  int frac_bits = 8;

  static FixedFormat make(int total_bits, int frac_bits);

  std::int64_t max_units() const { return (std::int64_t{1} << (total_bits - 1)) - 1; }
  std::int64_t min_units() const { return -(std::int64_t{1} << (total_bits - 1)); }
  double ulp() const;

  bool operator==(const FixedFormat&) const = default;
};

/// Bit widths per tensor class.
struct QuantScheme {
  std::string name;
  FixedFormat weights;
  FixedFormat softmax;
  FixedFormat arith;         // multiplier/adder operands and results
  FixedFormat intermediate;  // activations between layers

  /// Every class at `bits`: weights and softmax Q1.(bits-2), arithmetic and
  /// intermediate Q4.(bits-5).
  static QuantScheme uniform(int bits);
  /// Weights 8, softmax 24, arithmetic/intermediate 20.
  static QuantScheme hybrid1();
  /// Weights 8, softmax 24, arithmetic/intermediate 16.
  static QuantScheme hybrid2();

  /// q24 | q20 | q16 | hybrid1 | hybrid2; "float" yields nullopt.
  static std::optional<QuantScheme> from_name(const std::string& name);
};

/// Scheme names accepted on the command line, float first.
const std::vector<std::string>& scheme_names();

// Scalar primitives. Every result is saturated, never wrapped.

std::int64_t saturate(std::int64_t units, FixedFormat fmt);

/// Round-to-nearest-even of x * 2^frac, saturated.
std::int64_t quantize(double x, FixedFormat fmt);
double dequantize(std::int64_t units, FixedFormat fmt);
/// units * 2^-point for a tensor whose binary point differs from its format.
double dequantize_at(std::int64_t units, int point);

/// Arithmetic right shift with round-half-up for shift > 0, exact left shift
/// (clamped to the int64 range) for shift <= 0.
std::int64_t round_shift(std::int64_t value, int shift);

/// Moves `value` from binary point `from_point` to `to`, then saturates.
std::int64_t rescale(std::int64_t value, int from_point, FixedFormat to);

std::int64_t qadd(std::int64_t a, std::int64_t b, FixedFormat fmt);

/// Full-precision product of operands at binary points pa and pb,
/// rescaled to `out`.
std::int64_t qmul(std::int64_t a, int pa, std::int64_t b, int pb, FixedFormat out);

/// round(num / den) with halves rounded up; den must be positive.
std::int64_t div_round(std::int64_t num, std::int64_t den);

inline constexpr std::size_t kLanes = 16;

/// Reference 16-lane dot product: full-precision products, exact sum,
/// one rescale to `out`, then a saturating add onto `acc`.
std::int64_t qdot16(std::span<const std::int64_t, kLanes> a, int pa,
                    std::span<const std::int64_t, kLanes> b, int pb,
                    std::int64_t acc, FixedFormat out);

/// Softmax of one row given at format `in` (at least 4 fractional bits are
/// used by the exponent table). exp(d) for d in [-255/16, 0] comes from a
/// 256-entry table with linear interpolation; smaller values read as 0.
/// Probabilities are produced by cumulative division so the row sums to
/// exactly 1.0 in `out`.
std::vector<std::int64_t> qsoftmax(std::span<const std::int64_t> row, FixedFormat in,
                                   FixedFormat out);

/// 1/sqrt(x) by three Newton-Raphson steps from a leading-zero seed.
/// x must be positive (kDomain otherwise).
std::int64_t qsqrt_recip(std::int64_t x, FixedFormat in, FixedFormat out);
std::int64_t qsqrt_recip(std::int64_t x, FixedFormat fmt);

/// Internal formats of the layer-norm division/sqrt unit for a given
/// arithmetic format: the variance keeps 8 integer bits and as many of the
/// sum-of-squares fraction bits as fit in 32, and 1/sqrt keeps
/// enough integer bits to represent 1/sqrt(one arith ulp).
struct NormFormats {
  FixedFormat variance;
  FixedFormat inv_std;
};
NormFormats norm_formats(FixedFormat arith);

/// Integer tensor with a per-tensor power-of-two scale:
/// value = units * 2^(exponent - fmt.frac_bits).
struct QuantizedTensor {
  std::vector<std::int64_t> units;
  FixedFormat fmt;
  int exponent = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  int point() const { return fmt.frac_bits - exponent; }
  std::int64_t at(std::size_t r, std::size_t c) const { return units[r * cols + c]; }
  double value(std::size_t i) const { return dequantize_at(units[i], point()); }
};

/// Quantizes at `fmt`. With `pow2_scale` the exponent is chosen so that the
/// largest magnitude lands in [0.5, 1) before quantization.
QuantizedTensor quantize_tensor(std::span<const double> values, std::size_t rows,
                                std::size_t cols, FixedFormat fmt, bool pow2_scale);

}  // namespace tvbf

#endif  // TVBF_QUANT_HPP
