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


#ifndef TVBF_ACCEL_HPP
#define TVBF_ACCEL_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tvbf/qforward.hpp"
#include "tvbf/quant.hpp"

namespace tvbf::accel {

inline constexpr std::size_t kPeCount = 4;
inline constexpr std::size_t kLanesPerPe = kLanes;

// Non-linear unit latencies (cycles before the first result).
inline constexpr std::uint64_t kSoftmaxLatency = 4;
inline constexpr std::uint64_t kRsqrtLatency = 12;

/// One PE issue: a 16-lane slice of the dot product for output (row, col).
struct WorkItem {
  std::uint32_t pe = 0;
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::uint32_t lane_offset = 0;

  bool operator==(const WorkItem&) const = default;
};

/// Issue order for one (rows x depth) * (depth x cols) product.
struct TileSchedule {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t depth = 0;
  std::vector<WorkItem> items;
};

/// Canonical order: output elements row-major, element e on PE e % 4;
/// groups of four elements advance through their lane slices together.
TileSchedule make_schedule(std::size_t rows, std::size_t cols, std::size_t depth);

/// Throws kSchedule unless every output gets each lane slice exactly once,
/// in increasing order, without another output interleaved on its PE.
void validate_schedule(const TileSchedule& schedule);

/// Read-only integer matrix view, optionally transposed.
struct MatrixView {
  const std::int64_t* data = nullptr;
  std::size_t rows = 0;  // logical rows
  std::size_t cols = 0;  // logical cols
  bool transposed = false;

  static MatrixView of(const QMatrix& m) { return {m.data().data(), m.rows(), m.cols(), false}; }
  static MatrixView of(const QuantizedTensor& t) { return {t.units.data(), t.rows, t.cols, false}; }
  static MatrixView transpose_of(const QMatrix& m) {
    return {m.data().data(), m.cols(), m.rows(), true};
  }

  std::int64_t at(std::size_t r, std::size_t c) const {
    return transposed ? data[c * rows + r] : data[r * cols + c];
  }
};

/// 16 full-precision products reduced by a depth-4 adder tree, rescaled once
/// to `fmt`, then added to `acc` with saturation.
std::int64_t pe_dot16(std::span<const std::int64_t, kLanesPerPe> a,
                      std::span<const std::int64_t, kLanesPerPe> b, std::int64_t acc,
                      int pa, int pb, FixedFormat fmt);

struct LayerCycles {
  std::string name;
  std::uint64_t cycles = 0;
  std::uint64_t mac_ops = 0;
  std::uint64_t pe_issues = 0;
};

struct CycleReport {
  std::uint64_t cycles = 0;
  std::uint64_t mac_ops = 0;
  std::size_t lateral_lines = 0;
  std::vector<LayerCycles> layers;  // summed over lateral lines

  void add(const std::string& layer, std::uint64_t cycles, std::uint64_t macs,
           std::uint64_t issues);
  /// Fraction of multiplier lanes doing useful work over all cycles.
  double occupancy() const;
  /// key = value report, one block per layer.
  std::string to_text() const;
};

/// The 4 x 16 multiplier array with one accumulator register per PE.
class PeArray {
 public:
  explicit PeArray(FixedFormat arith) : arith_(arith) {}

  /// Runs `schedule` over a (rows x depth) and b (depth x cols). Results stay
  /// in arith units; `partial`, when given, seeds each accumulator.
  /// Returns the output memory; `cycles` receives the busiest PE's issues.
  QMatrix run(const MatrixView& a, int pa, const MatrixView& b, int pb,
              const TileSchedule& schedule, const QMatrix* partial = nullptr,
              std::uint64_t* cycles = nullptr);

  FixedFormat arith() const { return arith_; }

 private:
  FixedFormat arith_;
};

/// Input tokens (np x d, intermediate) times a weight tile (d x k).
QMatrix matmul_qkv(const QMatrix& input, const QuantizedTensor& weights,
                   const TileSchedule& schedule, const QuantScheme& scheme,
                   std::uint64_t* cycles = nullptr);

/// softmax(Q K^T / sqrt(k)) rows at the softmax format (np x np).
QMatrix attention_score(const QMatrix& q, const QMatrix& k, const QuantScheme& scheme,
                        std::uint64_t* cycles = nullptr);

/// score (np x np, softmax) times V (np x k, intermediate), accumulated onto
/// `partial` when given; arith units.
QMatrix head_output(const QMatrix& score, const QMatrix& v, const QuantScheme& scheme,
                    const QMatrix* partial = nullptr, std::uint64_t* cycles = nullptr);

struct SimResult {
  QImage image;
  CycleReport report;
};

SimResult simulate_model(const TofTensor& tensor, const QuantizedModel& model);
SimResult simulate_model(const TofTensor& tensor, const ModelWeights& weights,
                         const ModelConfig& config, const QuantScheme& scheme);

/// Closed-form cycle count of the performance model, without data.
CycleReport estimate_cycles(const ModelConfig& config, std::size_t lateral_lines);

}  // namespace tvbf::accel

#endif  // TVBF_ACCEL_HPP
