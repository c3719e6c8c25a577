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


#include "tvbf/qforward.hpp"

#include <algorithm>

#include "tvbf/error.hpp"

namespace tvbf {

namespace {

QuantizedTensor quantize_vector(const std::vector<double>& v, FixedFormat fmt) {
  return quantize_tensor(v, v.size(), 1, fmt, true);
}

QDense quantize_dense(const DenseLayer& layer, FixedFormat fmt) {
  return QDense{quantize_tensor(layer.w.data(), layer.w.rows(), layer.w.cols(), fmt, true),
                quantize_vector(layer.b, fmt)};
}

QNorm quantize_norm(const LayerNormParams& norm, FixedFormat fmt) {
  return QNorm{quantize_vector(norm.gamma, fmt), quantize_vector(norm.beta, fmt)};
}

QMatrix reshape(const QMatrix& m, std::size_t rows, std::size_t cols) {
  return QMatrix(rows, cols, m.data());
}

QMatrix residual(const QMatrix& x, const QMatrix& y, const QuantScheme& s) {
  const int fi = s.intermediate.frac_bits;
  QMatrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto sum = qadd(rescale(x.data()[i], fi, s.arith), rescale(y.data()[i], fi, s.arith),
                          s.arith);
    out.data()[i] = rescale(sum, s.arith.frac_bits, s.intermediate);
  }
  return out;
}

using Lanes = std::array<std::int64_t, kLanes>;

}  // namespace

QuantizedModel quantize_model(const ModelWeights& weights, const ModelConfig& config,
                              const QuantScheme& scheme) {
  validate_weights(weights, config);
  QuantizedModel m;
  m.config = config;
  m.scheme = scheme;
  const auto fmt = scheme.weights;
  for (const auto& layer : weights.encoder) m.encoder.push_back(quantize_dense(layer, fmt));
  for (std::size_t b = 0; b < kTransformerBlocks; ++b) {
    const auto& src = weights.blocks[b];
    auto& dst = m.blocks[b];
    dst.norm1 = quantize_norm(src.norm1, fmt);
    for (const auto& head : src.attention.heads)
      dst.heads.push_back(QHead{quantize_dense(head.query, fmt), quantize_dense(head.key, fmt),
                                quantize_dense(head.value, fmt)});
    dst.output = quantize_dense(src.attention.output, fmt);
    dst.norm2 = quantize_norm(src.norm2, fmt);
    dst.mlp1 = quantize_dense(src.mlp1, fmt);
    dst.mlp2 = quantize_dense(src.mlp2, fmt);
  }
  for (const auto& layer : weights.decoder) m.decoder.push_back(quantize_dense(layer, fmt));
  m.epsilon_units = std::max<std::int64_t>(1, quantize(config.norm_epsilon, scheme.arith));
  return m;
}

IQImage QImage::to_iq() const {
  IQImage iq;
  iq.grid = grid;
  iq.pixels = Array2<std::complex<double>>(units.rows(), units.cols() / 2);
  for (std::size_t r = 0; r < iq.pixels.rows(); ++r)
    for (std::size_t c = 0; c < iq.pixels.cols(); ++c)
      iq.pixels(r, c) = {dequantize(units(r, 2 * c), fmt),
                         dequantize(units(r, 2 * c + 1), fmt)};
  return iq;
}

QMatrix quantize_line_tokens(const TofTensor& tensor, std::size_t col,
                             const QuantizedModel& model) {
  const Matrix tokens = line_tokens(tensor, col, model.config);
  QMatrix q(tokens.rows(), tokens.cols());
  for (std::size_t i = 0; i < q.size(); ++i)
    q.data()[i] = quantize(tokens.data()[i], model.scheme.intermediate);
  return q;
}

namespace golden {

QMatrix dense(const QMatrix& x, const QDense& layer, Activation activation,
              const QuantScheme& scheme) {
  const std::size_t in = layer.w.rows;
  const std::size_t out = layer.w.cols;
  require(x.cols() == in, ErrorKind::kArgument, "quantized dense shape mismatch");
  const int pa = scheme.intermediate.frac_bits;
  const int pb = layer.w.point();
  QMatrix y(x.rows(), out);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < out; ++j) {
      std::int64_t acc = 0;
      for (std::size_t base = 0; base < in; base += kLanes) {
        Lanes a{};
        Lanes b{};
        for (std::size_t l = 0; l < kLanes && base + l < in; ++l) {
          a[l] = x(r, base + l);
          b[l] = layer.w.at(base + l, j);
        }
        acc = qdot16(a, pa, b, pb, acc, scheme.arith);
      }
      acc = qadd(acc, rescale(layer.b.units[j], layer.b.point(), scheme.arith), scheme.arith);
      if (activation == Activation::kRelu) acc = std::max<std::int64_t>(acc, 0);
      y(r, j) = rescale(acc, scheme.arith.frac_bits, scheme.intermediate);
    }
  return y;
}

QMatrix layer_norm(const QMatrix& x, const QNorm& norm, std::int64_t epsilon_units,
                   const QuantScheme& scheme) {
  const auto arith = scheme.arith;
  const int fa = arith.frac_bits;
  const int fi = scheme.intermediate.frac_bits;
  const auto nf = norm_formats(arith);
  const std::size_t n = x.cols();
  const auto count = static_cast<std::int64_t>(n);
  QMatrix y(x.rows(), n);
  std::vector<std::int64_t> d(n);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = rescale(x(r, i), fi, arith);
      sum += d[i];
    }
    const std::int64_t mean = saturate(div_round(sum, count), arith);
    std::int64_t sumsq = 0;
    for (auto& v : d) {
      v = qadd(v, -mean, arith);
      sumsq += v * v;
    }
    const std::int64_t var = qadd(rescale(div_round(sumsq, count), 2 * fa, nf.variance),
                                  rescale(epsilon_units, fa, nf.variance), nf.variance);
    const std::int64_t inv = qsqrt_recip(var, nf.variance, nf.inv_std);
    for (std::size_t i = 0; i < n; ++i) {
      const auto normed = qmul(d[i], fa, inv, nf.inv_std.frac_bits, arith);
      auto z = qmul(normed, fa, norm.gamma.units[i], norm.gamma.point(), arith);
      z = qadd(z, rescale(norm.beta.units[i], norm.beta.point(), arith), arith);
      y(r, i) = rescale(z, fa, scheme.intermediate);
    }
  }
  return y;
}

QMatrix attention(const QMatrix& x, const QBlock& block, const QuantScheme& scheme) {
  const auto arith = scheme.arith;
  const int fa = arith.frac_bits;
  const int fi = scheme.intermediate.frac_bits;
  const int fs = scheme.softmax.frac_bits;
  const std::size_t tokens = x.rows();
  const std::size_t k = block.heads.front().query.w.cols;
  const std::int64_t scale =
      qsqrt_recip(static_cast<std::int64_t>(k), FixedFormat::make(32, 0), arith);

  QMatrix concat(tokens, k * block.heads.size());
  for (std::size_t h = 0; h < block.heads.size(); ++h) {
    const auto& head = block.heads[h];
    const QMatrix q = dense(x, head.query, Activation::kNone, scheme);
    const QMatrix key = dense(x, head.key, Activation::kNone, scheme);
    const QMatrix v = dense(x, head.value, Activation::kNone, scheme);

    QMatrix score(tokens, tokens);
    for (std::size_t i = 0; i < tokens; ++i) {
      std::vector<std::int64_t> logits(tokens);
      for (std::size_t j = 0; j < tokens; ++j) {
        std::int64_t acc = 0;
        for (std::size_t base = 0; base < k; base += kLanes) {
          Lanes a{};
          Lanes b{};
          for (std::size_t l = 0; l < kLanes && base + l < k; ++l) {
            a[l] = q(i, base + l);
            b[l] = key(j, base + l);
          }
          acc = qdot16(a, fi, b, fi, acc, arith);
        }
        logits[j] = qmul(acc, fa, scale, fa, arith);
      }
      const auto p = qsoftmax(logits, arith, scheme.softmax);
      std::copy(p.begin(), p.end(), score.row(i).begin());
    }

    for (std::size_t i = 0; i < tokens; ++i)
      for (std::size_t c = 0; c < k; ++c) {
        std::int64_t acc = 0;
        for (std::size_t base = 0; base < tokens; base += kLanes) {
          Lanes a{};
          Lanes b{};
          for (std::size_t l = 0; l < kLanes && base + l < tokens; ++l) {
            a[l] = score(i, base + l);
            b[l] = v(base + l, c);
          }
          acc = qdot16(a, fs, b, fi, acc, arith);
        }
        concat(i, h * k + c) = rescale(acc, fa, scheme.intermediate);
      }
  }
  return dense(concat, block.output, Activation::kNone, scheme);
}

QMatrix transformer_block(const QMatrix& x, const QBlock& block,
                          const QuantizedModel& model) {
  const auto& s = model.scheme;
  const QMatrix u =
      residual(x, attention(layer_norm(x, block.norm1, model.epsilon_units, s), block, s), s);
  const QMatrix hidden = dense(layer_norm(u, block.norm2, model.epsilon_units, s), block.mlp1,
                               Activation::kRelu, s);
  return residual(u, dense(hidden, block.mlp2, Activation::kNone, s), s);
}

QMatrix forward_line(const TofTensor& tensor, std::size_t col, const QuantizedModel& model) {
  const auto& config = model.config;
  const auto& s = model.scheme;
  QMatrix h = quantize_line_tokens(tensor, col, model);
  for (std::size_t i = 0; i < model.encoder.size(); ++i) {
    const auto act = i + 1 < model.encoder.size() ? Activation::kRelu : Activation::kNone;
    h = dense(h, model.encoder[i], act, s);
    if (h.rows() == 1 && config.patches > 1)
      h = reshape(h, config.patches, h.cols() / config.patches);
  }
  for (const auto& block : model.blocks) h = transformer_block(h, block, model);
  for (std::size_t i = 0; i < model.decoder.size(); ++i) {
    const auto act = i + 1 < model.decoder.size() ? Activation::kRelu : Activation::kNone;
    h = dense(h, model.decoder[i], act, s);
  }
  return reshape(h, config.rows(), 2);
}

}  // namespace golden

QImage qforward_units(const TofTensor& tensor, const QuantizedModel& model) {
  QImage out;
  out.fmt = model.scheme.intermediate;
  out.grid = tensor.grid;
  out.units = QMatrix(tensor.rows(), 2 * tensor.cols());
  for (std::size_t col = 0; col < tensor.cols(); ++col) {
    const QMatrix iq = golden::forward_line(tensor, col, model);
    for (std::size_t r = 0; r < iq.rows(); ++r) {
      out.units(r, 2 * col) = iq(r, 0);
      out.units(r, 2 * col + 1) = iq(r, 1);
    }
  }
  return out;
}

IQImage qforward(const TofTensor& tensor, const ModelWeights& weights,
                 const ModelConfig& config, const QuantScheme& scheme) {
  return qforward_units(tensor, quantize_model(weights, config, scheme)).to_iq();
}

}  // namespace tvbf
