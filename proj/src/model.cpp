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


#include "tvbf/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tvbf/binary_io.hpp"
#include "tvbf/error.hpp"
#include "tvbf/keyvalue.hpp"
#include "tvbf/random.hpp"

namespace tvbf {

namespace {

constexpr char kWeightsMagic[] = "TVBF";
constexpr std::uint32_t kWeightsVersion = 1;

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

DenseLayer zero_dense(std::size_t in, std::size_t out) {
  return DenseLayer{Matrix(in, out), std::vector<double>(out, 0.0)};
}

LayerNormParams unit_norm(std::size_t width) {
  return LayerNormParams{std::vector<double>(width, 1.0),
                         std::vector<double>(width, 0.0)};
}

void check_dense(const DenseLayer& layer, std::size_t in, std::size_t out,
                 const std::string& name) {
  require(layer.w.rows() == in && layer.w.cols() == out && layer.b.size() == out,
          ErrorKind::kArgument, "weight shape mismatch in " + name);
}

Matrix reshape(const Matrix& m, std::size_t rows, std::size_t cols) {
  return Matrix(rows, cols, m.data());
}

Activation hidden_activation(std::size_t index, std::size_t count) {
  return index + 1 < count ? Activation::kRelu : Activation::kNone;
}

}  // namespace

void ModelConfig::validate() const {
  require(input_channels >= 1 && patch_rows >= 1 && patches >= 1 && d_model >= 1 &&
              heads >= 1 && mlp_width >= 1,
          ErrorKind::kConfig, "model dimensions must be positive");
  require(d_model % heads == 0, ErrorKind::kConfig,
          "d_model must be divisible by heads");
  for (auto w : encoder_widths)
    require(w >= 1, ErrorKind::kConfig, "encoder widths must be positive");
  for (auto w : decoder_widths)
    require(w >= 1, ErrorKind::kConfig, "decoder widths must be positive");
  require(norm_epsilon > 0.0, ErrorKind::kConfig, "norm_epsilon must be positive");
}

ModelConfig ModelConfig::default_config() { return ModelConfig{}; }

ModelConfig ModelConfig::parse(const std::string& text) {
  const auto kv = KeyValues::parse(text);
  ModelConfig c;
  c.input_channels = kv.get_size("input_channels", c.input_channels);
  c.patch_rows = kv.get_size("patch_rows", c.patch_rows);
  c.patches = kv.get_size("patches", c.patches);
  c.d_model = kv.get_size("d_model", c.d_model);
  c.heads = kv.get_size("heads", c.heads);
  c.mlp_width = kv.get_size("mlp_width", c.mlp_width);
  if (kv.has("encoder_widths")) c.encoder_widths = kv.get_sizes("encoder_widths");
  if (kv.has("decoder_widths")) c.decoder_widths = kv.get_sizes("decoder_widths");
  const auto embedding = kv.get("embedding", "line");
  if (embedding == "line")
    c.embedding = Embedding::kLine;
  else if (embedding == "patch")
    c.embedding = Embedding::kPatch;
  else
    fail(ErrorKind::kConfig, "embedding must be 'line' or 'patch'");
  c.norm_epsilon = kv.get_double("norm_epsilon", c.norm_epsilon);
  c.validate();
  return c;
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
  const auto kv = KeyValues::load(path);
  std::string text;
  for (const auto& [k, v] : kv.entries()) text += k + " = " + v + "\n";
  return parse(text);
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "input_channels = " << input_channels << "\n"
      << "patch_rows = " << patch_rows << "\n"
      << "patches = " << patches << "\n"
      << "d_model = " << d_model << "\n"
      << "heads = " << heads << "\n"
      << "mlp_width = " << mlp_width << "\n"
      << "encoder_widths = " << join(encoder_widths) << "\n"
      << "decoder_widths = " << join(decoder_widths) << "\n"
      << "embedding = " << (embedding == Embedding::kLine ? "line" : "patch") << "\n"
      << "norm_epsilon = " << norm_epsilon << "\n";
  return out.str();
}

std::vector<DenseShape> encoder_shapes(const ModelConfig& config) {
  std::vector<std::size_t> widths = config.encoder_widths;
  widths.push_back(config.d_model);
  std::vector<DenseShape> shapes;
  std::size_t in = config.token_width();
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i == 0 && config.embedding == Embedding::kLine)
      shapes.push_back({in * config.patches, widths[i] * config.patches, 1});
    else
      shapes.push_back({in, widths[i], config.patches});
    in = widths[i];
  }
  return shapes;
}

std::vector<DenseShape> decoder_shapes(const ModelConfig& config) {
  std::vector<std::size_t> widths = config.decoder_widths;
  widths.push_back(config.output_width());
  std::vector<DenseShape> shapes;
  std::size_t in = config.d_model;
  for (auto w : widths) {
    shapes.push_back({in, w, config.patches});
    in = w;
  }
  return shapes;
}

ModelWeights zero_weights(const ModelConfig& config) {
  config.validate();
  ModelWeights w;
  for (const auto& s : encoder_shapes(config)) w.encoder.push_back(zero_dense(s.in, s.out));
  const std::size_t d = config.d_model;
  for (auto& block : w.blocks) {
    block.norm1 = unit_norm(d);
    block.norm2 = unit_norm(d);
    block.attention.heads.resize(config.heads);
    for (auto& head : block.attention.heads) {
      head.query = zero_dense(d, config.head_dim());
      head.key = zero_dense(d, config.head_dim());
      head.value = zero_dense(d, config.head_dim());
    }
    block.attention.output = zero_dense(d, d);
    block.mlp1 = zero_dense(d, config.mlp_width);
    block.mlp2 = zero_dense(config.mlp_width, d);
  }
  for (const auto& s : decoder_shapes(config)) w.decoder.push_back(zero_dense(s.in, s.out));
  return w;
}

void for_each_tensor(ModelWeights& weights, const TensorVisitor& visit) {
  auto dense = [&](const std::string& name, DenseLayer& layer) {
    visit(name + ".weight", layer.w.rows(), layer.w.cols(), layer.w.data());
    visit(name + ".bias", layer.b.size(), 1, layer.b);
  };
  auto norm = [&](const std::string& name, LayerNormParams& p) {
    visit(name + ".gamma", p.gamma.size(), 1, p.gamma);
    visit(name + ".beta", p.beta.size(), 1, p.beta);
  };
  for (std::size_t i = 0; i < weights.encoder.size(); ++i)
    dense("encoder." + std::to_string(i), weights.encoder[i]);
  for (std::size_t b = 0; b < weights.blocks.size(); ++b) {
    auto& block = weights.blocks[b];
    const std::string prefix = "block." + std::to_string(b);
    norm(prefix + ".norm1", block.norm1);
    for (std::size_t h = 0; h < block.attention.heads.size(); ++h) {
      const std::string hp = prefix + ".attention.head." + std::to_string(h);
      dense(hp + ".query", block.attention.heads[h].query);
      dense(hp + ".key", block.attention.heads[h].key);
      dense(hp + ".value", block.attention.heads[h].value);
    }
    dense(prefix + ".attention.output", block.attention.output);
    norm(prefix + ".norm2", block.norm2);
    dense(prefix + ".mlp1", block.mlp1);
    dense(prefix + ".mlp2", block.mlp2);
  }
  for (std::size_t i = 0; i < weights.decoder.size(); ++i)
    dense("decoder." + std::to_string(i), weights.decoder[i]);
}

ModelWeights random_weights(const ModelConfig& config, std::uint64_t seed) {
  auto w = zero_weights(config);
  Rng rng(seed);
  for_each_tensor(w, [&](const std::string& name, std::size_t rows, std::size_t cols,
                         std::vector<double>& data) {
    const auto ends_with = [&](const char* suffix) {
      const std::string s(suffix);
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    for (double& v : data) {
      double x;
      if (ends_with(".weight"))
        x = rng.uniform(-1.0, 1.0) * std::sqrt(6.0 / static_cast<double>(rows + cols));
      else if (ends_with(".gamma"))
        x = 1.0 + rng.uniform(-0.1, 0.1);
      else
        x = rng.uniform(-0.05, 0.05);
      v = static_cast<float>(x);
    }
  });
  return w;
}

void validate_weights(const ModelWeights& weights, const ModelConfig& config) {
  config.validate();
  const auto enc = encoder_shapes(config);
  require(weights.encoder.size() == enc.size(), ErrorKind::kArgument,
          "encoder layer count mismatch");
  for (std::size_t i = 0; i < enc.size(); ++i)
    check_dense(weights.encoder[i], enc[i].in, enc[i].out, "encoder");
  const std::size_t d = config.d_model;
  for (const auto& block : weights.blocks) {
    require(block.norm1.gamma.size() == d && block.norm1.beta.size() == d &&
                block.norm2.gamma.size() == d && block.norm2.beta.size() == d,
            ErrorKind::kArgument, "layer norm width mismatch");
    require(block.attention.heads.size() == config.heads, ErrorKind::kArgument,
            "attention head count mismatch");
    for (const auto& head : block.attention.heads) {
      check_dense(head.query, d, config.head_dim(), "query");
      check_dense(head.key, d, config.head_dim(), "key");
      check_dense(head.value, d, config.head_dim(), "value");
    }
    check_dense(block.attention.output, d, d, "attention output");
    check_dense(block.mlp1, d, config.mlp_width, "mlp1");
    check_dense(block.mlp2, config.mlp_width, d, "mlp2");
  }
  const auto dec = decoder_shapes(config);
  require(weights.decoder.size() == dec.size(), ErrorKind::kArgument,
          "decoder layer count mismatch");
  for (std::size_t i = 0; i < dec.size(); ++i)
    check_dense(weights.decoder[i], dec[i].in, dec[i].out, "decoder");
}

void save_weights(const ModelWeights& weights, const ModelConfig& config,
                  const std::filesystem::path& path) {
  validate_weights(weights, config);
  io::Writer out;
  out.magic(kWeightsMagic);
  out.u32(kWeightsVersion);
  out.u32(static_cast<std::uint32_t>(config.input_channels));
  out.u32(static_cast<std::uint32_t>(config.patch_rows));
  out.u32(static_cast<std::uint32_t>(config.patches));
  out.u32(static_cast<std::uint32_t>(config.d_model));
  out.u32(static_cast<std::uint32_t>(config.heads));
  out.u32(static_cast<std::uint32_t>(config.mlp_width));
  out.u32(config.embedding == Embedding::kLine ? 1u : 0u);
  out.u32(static_cast<std::uint32_t>(config.encoder_widths.size()));
  for (auto w : config.encoder_widths) out.u32(static_cast<std::uint32_t>(w));
  out.u32(static_cast<std::uint32_t>(config.decoder_widths.size()));
  for (auto w : config.decoder_widths) out.u32(static_cast<std::uint32_t>(w));
  out.f64(config.norm_epsilon);

  auto copy = weights;
  std::uint32_t records = 0;
  for_each_tensor(copy, [&](const std::string&, std::size_t, std::size_t,
                            std::vector<double>&) { ++records; });
  out.u32(records);
  for_each_tensor(copy, [&](const std::string& name, std::size_t rows, std::size_t cols,
                            std::vector<double>& data) {
    out.str(name);
    out.u32(static_cast<std::uint32_t>(rows));
    out.u32(static_cast<std::uint32_t>(cols));
    for (double v : data) out.f32(static_cast<float>(v));
  });
  out.write_file(path);
}

LoadedModel load_weights(const std::filesystem::path& path) {
  auto in = io::Reader::from_file(path);
  require(in.has_magic(kWeightsMagic), ErrorKind::kFormat,
          "not a TVBF weight file: " + path.string());
  in.skip(4);
  const auto version = in.u32();
  require(version == kWeightsVersion, ErrorKind::kFormat,
          "unsupported TVBF version " + std::to_string(version));

  LoadedModel m;
  auto& c = m.config;
  c.input_channels = in.u32();
  c.patch_rows = in.u32();
  c.patches = in.u32();
  c.d_model = in.u32();
  c.heads = in.u32();
  c.mlp_width = in.u32();
  c.embedding = in.u32() == 1 ? Embedding::kLine : Embedding::kPatch;
  c.encoder_widths.resize(in.u32());
  for (auto& w : c.encoder_widths) w = in.u32();
  c.decoder_widths.resize(in.u32());
  for (auto& w : c.decoder_widths) w = in.u32();
  c.norm_epsilon = in.f64();
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kCorruption, std::string("TVBF config block invalid: ") + e.what());
  }

  m.weights = zero_weights(c);
  std::uint32_t expected = 0;
  for_each_tensor(m.weights, [&](const std::string&, std::size_t, std::size_t,
                                 std::vector<double>&) { ++expected; });
  require(in.u32() == expected, ErrorKind::kCorruption,
          "TVBF record count does not match config");
  for_each_tensor(m.weights, [&](const std::string& name, std::size_t rows,
                                 std::size_t cols, std::vector<double>& data) {
    const auto id = in.str();
    const auto r = in.u32();
    const auto k = in.u32();
    require(id == name && r == rows && k == cols, ErrorKind::kCorruption,
            "TVBF record '" + id + "' does not match expected '" + name + "'");
    for (double& v : data) {
      const float f = in.f32();
      require(std::isfinite(f), ErrorKind::kData, "non-finite weight in " + name);
      v = f;
    }
  });
  require(in.remaining() == 0, ErrorKind::kCorruption, "trailing bytes in TVBF file");
  return m;
}

Matrix dense_forward(const Matrix& x, const DenseLayer& layer, Activation activation) {
  require(x.cols() == layer.w.rows() && layer.b.size() == layer.w.cols(),
          ErrorKind::kArgument, "dense_forward shape mismatch");
  const std::size_t in = layer.w.rows();
  const std::size_t out = layer.w.cols();
  Matrix y(x.rows(), out);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto yr = y.row(r);
    std::copy(layer.b.begin(), layer.b.end(), yr.begin());
    const auto xr = x.row(r);
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = xr[i];
      if (xv == 0.0) continue;
      const auto wr = layer.w.row(i);
      for (std::size_t j = 0; j < out; ++j) yr[j] += xv * wr[j];
    }
    if (activation == Activation::kRelu)
      for (double& v : yr) v = std::max(0.0, v);
  }
  return y;
}

Matrix layer_norm(const Matrix& x, const LayerNormParams& params, double epsilon) {
  const std::size_t n = x.cols();
  require(n >= 2, ErrorKind::kArgument, "layer_norm needs rows of width >= 2");
  require(params.gamma.size() == n && params.beta.size() == n, ErrorKind::kArgument,
          "layer_norm parameter width mismatch");
  Matrix y(x.rows(), n);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t i = 0; i < n; ++i)
      y(r, i) = (xr[i] - mean) * inv * params.gamma[i] + params.beta[i];
  }
  return y;
}

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    const double peak = *std::max_element(xr.begin(), xr.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < xr.size(); ++i) sum += y(r, i) = std::exp(xr[i] - peak);
    for (double& v : y.row(r)) v /= sum;
  }
  return y;
}

Matrix mha_forward(const Matrix& x, const MultiHeadAttention& attention) {
  require(!attention.heads.empty(), ErrorKind::kArgument, "attention has no heads");
  const std::size_t tokens = x.rows();
  const std::size_t k = attention.heads.front().query.w.cols();
  const std::size_t d = attention.heads.size() * k;
  require(attention.output.w.rows() == d, ErrorKind::kArgument,
          "attention output projection width mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));

  Matrix concat(tokens, d);
  for (std::size_t h = 0; h < attention.heads.size(); ++h) {
    const auto& head = attention.heads[h];
    const Matrix q = dense_forward(x, head.query);
    const Matrix kk = dense_forward(x, head.key);
    const Matrix v = dense_forward(x, head.value);
    Matrix logits(tokens, tokens);
    for (std::size_t i = 0; i < tokens; ++i)
      for (std::size_t j = 0; j < tokens; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < k; ++c) s += q(i, c) * kk(j, c);
        logits(i, j) = s * scale;
      }
    const Matrix score = softmax_rows(logits);
    for (std::size_t i = 0; i < tokens; ++i)
      for (std::size_t c = 0; c < k; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < tokens; ++j) s += score(i, j) * v(j, c);
        concat(i, h * k + c) = s;
      }
  }
  return dense_forward(concat, attention.output);
}

namespace {

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

}  // namespace

Matrix transformer_block(const Matrix& x, const TransformerBlock& block,
                         double epsilon) {
  const Matrix u = add(x, mha_forward(layer_norm(x, block.norm1, epsilon), block.attention));
  const Matrix hidden =
      dense_forward(layer_norm(u, block.norm2, epsilon), block.mlp1, Activation::kRelu);
  return add(u, dense_forward(hidden, block.mlp2));
}

Matrix line_tokens(const TofTensor& tensor, std::size_t col, const ModelConfig& config) {
  require(tensor.rows() == config.rows(), ErrorKind::kArgument,
          "grid rows do not match patches * patch_rows");
  require(tensor.channels() == config.input_channels, ErrorKind::kArgument,
          "tensor channel count does not match model input_channels");
  require(col < tensor.cols(), ErrorKind::kArgument, "lateral line out of range");
  const std::size_t width = config.token_width();
  Matrix tokens(config.patches, width);
  for (std::size_t t = 0; t < config.patches; ++t)
    for (std::size_t r = 0; r < config.patch_rows; ++r) {
      const double* src = &tensor.data[tensor.index(t * config.patch_rows + r, col, 0)];
      std::copy(src, src + config.input_channels,
                &tokens(t, r * config.input_channels));
    }
  if (config.embedding == Embedding::kLine)
    return reshape(tokens, 1, config.patches * width);
  return tokens;
}

Matrix vbf_forward_line(const TofTensor& tensor, std::size_t col,
                        const ModelWeights& weights, const ModelConfig& config) {
  Matrix h = line_tokens(tensor, col, config);
  for (std::size_t i = 0; i < weights.encoder.size(); ++i) {
    h = dense_forward(h, weights.encoder[i], hidden_activation(i, weights.encoder.size()));
    if (h.rows() == 1 && config.patches > 1)
      h = reshape(h, config.patches, h.cols() / config.patches);
  }
  for (const auto& block : weights.blocks) h = transformer_block(h, block, config.norm_epsilon);
  for (std::size_t i = 0; i < weights.decoder.size(); ++i)
    h = dense_forward(h, weights.decoder[i], hidden_activation(i, weights.decoder.size()));
  return reshape(h, config.rows(), 2);
}

IQImage vbf_forward(const TofTensor& tensor, const ModelWeights& weights,
                    const ModelConfig& config) {
  validate_weights(weights, config);
  IQImage out;
  out.grid = tensor.grid;
  out.pixels = Array2<std::complex<double>>(tensor.rows(), tensor.cols());
  for (std::size_t col = 0; col < tensor.cols(); ++col) {
    const Matrix iq = vbf_forward_line(tensor, col, weights, config);
    for (std::size_t r = 0; r < iq.rows(); ++r)
      out.pixels(r, col) = {iq(r, 0), iq(r, 1)};
  }
  return out;
}

std::uint64_t param_count(const ModelConfig& config) {
  config.validate();
  std::uint64_t n = 0;
  const auto dense = [&](std::uint64_t in, std::uint64_t out) { n += in * out + out; };
  for (const auto& s : encoder_shapes(config)) dense(s.in, s.out);
  const std::uint64_t d = config.d_model;
  const std::uint64_t block = 2 * (2 * d)                             // two norms
                              + config.heads * 3 * (d * config.head_dim() + config.head_dim())
                              + (d * d + d)                           // output projection
                              + (d * config.mlp_width + config.mlp_width) +
                              (config.mlp_width * d + d);
  n += kTransformerBlocks * block;
  for (const auto& s : decoder_shapes(config)) dense(s.in, s.out);
  return n;
}

std::uint64_t mac_count(const ModelConfig& config, std::size_t lateral_lines) {
  config.validate();
  std::uint64_t per_line = 0;
  for (const auto& s : encoder_shapes(config))
    per_line += static_cast<std::uint64_t>(s.rows) * s.in * s.out;
  const std::uint64_t np = config.patches;
  const std::uint64_t d = config.d_model;
  const std::uint64_t block = 3 * np * d * d       // query, key, value
                              + 2 * np * np * d    // scores and score * value
                              + np * d * d         // output projection
                              + 2 * np * d * config.mlp_width;
  per_line += kTransformerBlocks * block;
  for (const auto& s : decoder_shapes(config))
    per_line += static_cast<std::uint64_t>(s.rows) * s.in * s.out;
  return per_line * lateral_lines;
}

std::uint64_t flops_count(const ModelConfig& config, const PixelGrid& grid) {
  require(grid.rows() == config.rows(), ErrorKind::kArgument,
          "grid rows do not match patches * patch_rows");
  const std::uint64_t np = config.patches;
  const std::uint64_t aux = kTransformerBlocks * np * np * config.d_model;
  return 2 * mac_count(config, grid.cols()) + aux * grid.cols();
}

}  // namespace tvbf
