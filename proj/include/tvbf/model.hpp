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


#ifndef TVBF_MODEL_HPP
#define TVBF_MODEL_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tvbf/array.hpp"
#include "tvbf/core_data.hpp"

namespace tvbf {

/// How a lateral line enters the encoder.
///  - kPatch: each of the `patches` tokens (patch_rows x channels) passes
///    through the first encoder layer separately.
///  - kLine: the first encoder layer sees the whole line at once and its
///    output is split into `patches` tokens.
enum class Embedding { kPatch, kLine };

enum class Activation { kNone, kRelu };

struct ModelConfig {
  std::size_t input_channels = 128;
  std::size_t patch_rows = 92;
  std::size_t patches = 4;  // tokens per lateral line
  std::size_t d_model = 8;
  std::size_t heads = 2;
  std::size_t mlp_width = 16;
  std::vector<std::size_t> encoder_widths;  // hidden widths before d_model
  std::vector<std::size_t> decoder_widths{16};  // hidden widths before 2*patch_rows
  Embedding embedding = Embedding::kLine;
  double norm_epsilon = 1e-6;

  std::size_t head_dim() const { return d_model / heads; }
  std::size_t rows() const { return patches * patch_rows; }
  std::size_t token_width() const { return patch_rows * input_channels; }
  std::size_t output_width() const { return 2 * patch_rows; }

  void validate() const;

  /// The shipped configuration for the 368-row frame.
  static ModelConfig default_config();

  static ModelConfig parse(const std::string& text);
  static ModelConfig load(const std::filesystem::path& path);
  std::string to_text() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Shape of one dense layer and how many row vectors it processes per line.
struct DenseShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t rows = 0;
};

std::vector<DenseShape> encoder_shapes(const ModelConfig& config);
std::vector<DenseShape> decoder_shapes(const ModelConfig& config);

struct DenseLayer {
  Matrix w;  // in x out
  std::vector<double> b;
};

struct LayerNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
};

struct AttentionHead {
  DenseLayer query;  // d_model x k
  DenseLayer key;
  DenseLayer value;
};

struct MultiHeadAttention {
  std::vector<AttentionHead> heads;
  DenseLayer output;  // d_model x d_model
};

struct TransformerBlock {
  LayerNormParams norm1;
  MultiHeadAttention attention;
  LayerNormParams norm2;
  DenseLayer mlp1;  // d_model x mlp_width, ReLU
  DenseLayer mlp2;  // mlp_width x d_model
};

inline constexpr std::size_t kTransformerBlocks = 2;

struct ModelWeights {
  std::vector<DenseLayer> encoder;
  std::array<TransformerBlock, kTransformerBlocks> blocks;
  std::vector<DenseLayer> decoder;
};

/// Zero-filled weights with every shape matching `config`.
ModelWeights zero_weights(const ModelConfig& config);

/// Uniform Glorot initialisation from a seed; values are float-representable
/// so the TVBF container round-trips them exactly.
ModelWeights random_weights(const ModelConfig& config, std::uint64_t seed);

void validate_weights(const ModelWeights& weights, const ModelConfig& config);

/// Visits every learned tensor in container order with a stable name.
/// Matrices report (rows, cols); vectors report (n, 1).
using TensorVisitor = std::function<void(const std::string& name, std::size_t rows,
                                         std::size_t cols, std::vector<double>& data)>;
void for_each_tensor(ModelWeights& weights, const TensorVisitor& visit);

void save_weights(const ModelWeights& weights, const ModelConfig& config,
                  const std::filesystem::path& path);

struct LoadedModel {
  ModelConfig config;
  ModelWeights weights;
};
LoadedModel load_weights(const std::filesystem::path& path);

// Layer operations on row-major (tokens x width) matrices.

Matrix dense_forward(const Matrix& x, const DenseLayer& layer,
                     Activation activation = Activation::kNone);
Matrix layer_norm(const Matrix& x, const LayerNormParams& params, double epsilon);
Matrix softmax_rows(const Matrix& x);
Matrix mha_forward(const Matrix& x, const MultiHeadAttention& attention);
Matrix transformer_block(const Matrix& x, const TransformerBlock& block,
                         double epsilon);

/// Token matrix for lateral line `col`: patches x token_width, or
/// 1 x (patches*token_width) for line embedding.
Matrix line_tokens(const TofTensor& tensor, std::size_t col,
                   const ModelConfig& config);

/// Full forward pass of one lateral line; returns rows x 2 (I, Q).
Matrix vbf_forward_line(const TofTensor& tensor, std::size_t col,
                        const ModelWeights& weights, const ModelConfig& config);

IQImage vbf_forward(const TofTensor& tensor, const ModelWeights& weights,
                    const ModelConfig& config);

std::uint64_t param_count(const ModelConfig& config);

/// Multiply-accumulates per frame across all matrix products.
std::uint64_t mac_count(const ModelConfig& config, std::size_t lateral_lines);

/// 2 ops per MAC plus patches^2 * d_model auxiliary attention ops per block,
/// summed over every lateral line of the grid.
std::uint64_t flops_count(const ModelConfig& config, const PixelGrid& grid);

}  // namespace tvbf

#endif  // TVBF_MODEL_HPP
