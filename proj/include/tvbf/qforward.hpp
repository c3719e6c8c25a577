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


#ifndef TVBF_QFORWARD_HPP
#define TVBF_QFORWARD_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "tvbf/array.hpp"
#include "tvbf/core_data.hpp"
#include "tvbf/model.hpp"
#include "tvbf/quant.hpp"

namespace tvbf {

/// Integer activations; the binary point is implied by the producing stage.
using QMatrix = Array2<std::int64_t>;

struct QDense {
  QuantizedTensor w;  // in x out
  QuantizedTensor b;
};

struct QNorm {
  QuantizedTensor gamma;
  QuantizedTensor beta;
};

struct QHead {
  QDense query;
  QDense key;
  QDense value;
};

struct QBlock {
  QNorm norm1;
  std::vector<QHead> heads;
  QDense output;
  QNorm norm2;
  QDense mlp1;
  QDense mlp2;
};

/// Model weights quantized to `scheme.weights` with a power-of-two scale per
/// tensor. Shared input of the golden model and the accelerator simulator.
struct QuantizedModel {
  ModelConfig config;
  QuantScheme scheme;
  std::vector<QDense> encoder;
  std::array<QBlock, kTransformerBlocks> blocks;
  std::vector<QDense> decoder;
  std::int64_t epsilon_units = 1;  // layer-norm epsilon in arith units, >= 1
};

QuantizedModel quantize_model(const ModelWeights& weights, const ModelConfig& config,
                              const QuantScheme& scheme);

/// Integer IQ output: rows x (2 * cols), I and Q interleaved per pixel, at
/// the scheme's intermediate format.
struct QImage {
  QMatrix units;
  FixedFormat fmt;
  PixelGrid grid;

  IQImage to_iq() const;
  bool operator==(const QImage&) const = default;
};

/// Normalized input tensor values at the intermediate format.
QMatrix quantize_line_tokens(const TofTensor& tensor, std::size_t col,
                             const QuantizedModel& model);

namespace golden {

// Reference semantics for the fixed-point forward pass. Dot products run in
// 16-lane chunks through qdot16 (zero padded), accumulating in arith format
// with a saturating add per chunk; bias is added once after the last chunk;
// results are rescaled to the intermediate format.

QMatrix dense(const QMatrix& x, const QDense& layer, Activation activation,
              const QuantScheme& scheme);
QMatrix layer_norm(const QMatrix& x, const QNorm& norm, std::int64_t epsilon_units,
                   const QuantScheme& scheme);
QMatrix attention(const QMatrix& x, const QBlock& block, const QuantScheme& scheme);
QMatrix transformer_block(const QMatrix& x, const QBlock& block,
                          const QuantizedModel& model);
QMatrix forward_line(const TofTensor& tensor, std::size_t col,
                     const QuantizedModel& model);

}  // namespace golden

QImage qforward_units(const TofTensor& tensor, const QuantizedModel& model);

/// Fixed-point forward pass; every product and sum uses scheme.arith,
/// activations are re-quantized to scheme.intermediate, softmax runs at
/// scheme.softmax.
IQImage qforward(const TofTensor& tensor, const ModelWeights& weights,
                 const ModelConfig& config, const QuantScheme& scheme);

}  // namespace tvbf

#endif  // TVBF_QFORWARD_HPP
