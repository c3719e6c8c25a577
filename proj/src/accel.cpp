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


#include "tvbf/accel.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "tvbf/error.hpp"

namespace tvbf::accel {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

std::uint64_t matmul_cycles(std::uint64_t rows, std::uint64_t cols, std::uint64_t depth) {
  return ceil_div(rows * cols, kPeCount) * ceil_div(depth, kLanesPerPe);
}

std::uint64_t norm_cycles(std::uint64_t rows, std::uint64_t width) {
  // accumulate, reciprocal square root, normalize
  return rows * (2 * width + kRsqrtLatency);
}

std::uint64_t scale_cycles(std::uint64_t tokens) { return tokens * tokens + kRsqrtLatency; }
std::uint64_t softmax_cycles(std::uint64_t tokens) { return tokens * tokens + kSoftmaxLatency; }

// Bias, activation and re-quantization applied as results leave the array.
QMatrix output_unit(const QMatrix& acc, const QuantizedTensor* bias, Activation activation,
                    const QuantScheme& s) {
  QMatrix out(acc.rows(), acc.cols());
  for (std::size_t r = 0; r < acc.rows(); ++r)
    for (std::size_t c = 0; c < acc.cols(); ++c) {
      std::int64_t v = acc(r, c);
      if (bias) v = qadd(v, rescale(bias->units[c], bias->point(), s.arith), s.arith);
      if (activation == Activation::kRelu && v < 0) v = 0;
      out(r, c) = rescale(v, s.arith.frac_bits, s.intermediate);
    }
  return out;
}

QMatrix norm_unit(const QMatrix& x, const QNorm& norm, std::int64_t epsilon_units,
                  const QuantScheme& s) {
  const int fa = s.arith.frac_bits;
  const auto nf = norm_formats(s.arith);
  const auto width = static_cast<std::int64_t>(x.cols());
  QMatrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    std::vector<std::int64_t> centered(in.size());
    std::transform(in.begin(), in.end(), centered.begin(), [&](std::int64_t v) {
      return rescale(v, s.intermediate.frac_bits, s.arith);
    });
    std::int64_t total = 0;
    for (auto v : centered) total += v;
    const std::int64_t mean = saturate(div_round(total, width), s.arith);
    std::int64_t energy = 0;
    for (auto& v : centered) {
      v = qadd(v, -mean, s.arith);
      energy += v * v;
    }
    const std::int64_t variance =
        qadd(rescale(div_round(energy, width), 2 * fa, nf.variance),
             rescale(epsilon_units, fa, nf.variance), nf.variance);
    const std::int64_t inv_std = qsqrt_recip(variance, nf.variance, nf.inv_std);
    auto dst = out.row(r);
    for (std::size_t i = 0; i < centered.size(); ++i) {
      std::int64_t v = qmul(centered[i], fa, inv_std, nf.inv_std.frac_bits, s.arith);
      v = qmul(v, fa, norm.gamma.units[i], norm.gamma.point(), s.arith);
      v = qadd(v, rescale(norm.beta.units[i], norm.beta.point(), s.arith), s.arith);
      dst[i] = rescale(v, fa, s.intermediate);
    }
  }
  return out;
}

QMatrix residual_unit(const QMatrix& a, const QMatrix& b, const QuantScheme& s) {
  QMatrix out(a.rows(), a.cols());
  const int fi = s.intermediate.frac_bits;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto sum =
        qadd(rescale(a.data()[i], fi, s.arith), rescale(b.data()[i], fi, s.arith), s.arith);
    out.data()[i] = rescale(sum, s.arith.frac_bits, s.intermediate);
  }
  return out;
}

}  // namespace

TileSchedule make_schedule(std::size_t rows, std::size_t cols, std::size_t depth) {
  require(rows >= 1 && cols >= 1 && depth >= 1, ErrorKind::kArgument,
          "schedule dimensions must be positive");
  TileSchedule s{rows, cols, depth, {}};
  const std::size_t outputs = rows * cols;
  const std::size_t slices = ceil_div(depth, kLanesPerPe);
  s.items.reserve(outputs * slices);
  for (std::size_t group = 0; group < outputs; group += kPeCount)
    for (std::size_t slice = 0; slice < slices; ++slice)
      for (std::size_t pe = 0; pe < kPeCount && group + pe < outputs; ++pe) {
        const std::size_t e = group + pe;
        s.items.push_back(WorkItem{static_cast<std::uint32_t>(pe),
                                   static_cast<std::uint32_t>(e / cols),
                                   static_cast<std::uint32_t>(e % cols),
                                   static_cast<std::uint32_t>(slice * kLanesPerPe)});
      }
  return s;
}

void validate_schedule(const TileSchedule& schedule) {
  const std::size_t slices = ceil_div(schedule.depth, kLanesPerPe);
  std::vector<std::uint8_t> done(schedule.rows * schedule.cols, 0);
  struct Progress {
    bool busy = false;
    std::size_t output = 0;
    std::size_t next_slice = 0;
  };
  std::array<Progress, kPeCount> pes{};

  for (const auto& item : schedule.items) {
    require(item.pe < kPeCount, ErrorKind::kSchedule, "work item names a missing PE");
    require(item.row < schedule.rows && item.col < schedule.cols, ErrorKind::kSchedule,
            "work item outside the output tile");
    require(item.lane_offset % kLanesPerPe == 0, ErrorKind::kSchedule,
            "lane offset is not a multiple of 16");
    const std::size_t slice = item.lane_offset / kLanesPerPe;
    require(slice < slices, ErrorKind::kSchedule, "lane offset beyond the reduction depth");
    const std::size_t output = item.row * schedule.cols + item.col;
    auto& pe = pes[item.pe];
    if (slice == 0) {
      require(!pe.busy, ErrorKind::kSchedule, "PE starts an output before finishing another");
      require(!done[output], ErrorKind::kSchedule, "output element scheduled twice");
      pe = Progress{true, output, 0};
    }
    require(pe.busy && pe.output == output && pe.next_slice == slice, ErrorKind::kSchedule,
            "lane slices out of order or interleaved on a PE");
    if (++pe.next_slice == slices) {
      pe.busy = false;
      done[output] = 1;
    }
  }
  for (const auto& pe : pes)
    require(!pe.busy, ErrorKind::kSchedule, "schedule ends with an unfinished output");
  require(std::all_of(done.begin(), done.end(), [](std::uint8_t d) { return d != 0; }),
          ErrorKind::kSchedule, "schedule leaves output elements unwritten");
}

std::int64_t pe_dot16(std::span<const std::int64_t, kLanesPerPe> a,
                      std::span<const std::int64_t, kLanesPerPe> b, std::int64_t acc,
                      int pa, int pb, FixedFormat fmt) {
  // multipliers
  std::array<std::int64_t, 16> p{};
  for (std::size_t i = 0; i < 16; ++i) p[i] = a[i] * b[i];
  // adder tree, four levels
  std::array<std::int64_t, 8> l1{};
  for (std::size_t i = 0; i < 8; ++i) l1[i] = p[2 * i] + p[2 * i + 1];
  std::array<std::int64_t, 4> l2{};
  for (std::size_t i = 0; i < 4; ++i) l2[i] = l1[2 * i] + l1[2 * i + 1];
  const std::int64_t l3a = l2[0] + l2[1];
  const std::int64_t l3b = l2[2] + l2[3];
  const std::int64_t tree = l3a + l3b;
  return saturate(acc + rescale(tree, pa + pb, fmt), fmt);
}

void CycleReport::add(const std::string& layer, std::uint64_t layer_cycles,
                      std::uint64_t macs, std::uint64_t issues) {
  cycles += layer_cycles;
  mac_ops += macs;
  auto it = std::find_if(layers.begin(), layers.end(),
                         [&](const LayerCycles& l) { return l.name == layer; });
  if (it == layers.end()) {
    layers.push_back(LayerCycles{layer, 0, 0, 0});
    it = std::prev(layers.end());
  }
  it->cycles += layer_cycles;
  it->mac_ops += macs;
  it->pe_issues += issues;
}

double CycleReport::occupancy() const {
  if (cycles == 0) return 0.0;
  return static_cast<double>(mac_ops) /
         (static_cast<double>(cycles) * static_cast<double>(kPeCount * kLanesPerPe));
}

std::string CycleReport::to_text() const {
  std::ostringstream out;
  out << "# accelerator performance model: " << kPeCount << " PEs x " << kLanesPerPe
      << " lanes, single-cycle on-chip memory\n";
  out << "lateral_lines = " << lateral_lines << "\n";
  out << "total.cycles = " << cycles << "\n";
  out << "total.mac_ops = " << mac_ops << "\n";
  out << "total.occupancy = " << occupancy() << "\n";
  for (const auto& l : layers) {
    const double occ = l.cycles == 0 ? 0.0
                                     : static_cast<double>(l.mac_ops) /
                                           (static_cast<double>(l.cycles) * kPeCount * kLanesPerPe);
    out << "layer." << l.name << ".cycles = " << l.cycles << "\n";
    out << "layer." << l.name << ".mac_ops = " << l.mac_ops << "\n";
    out << "layer." << l.name << ".occupancy = " << occ << "\n";
  }
  return out.str();
}

QMatrix PeArray::run(const MatrixView& a, int pa, const MatrixView& b, int pb,
                     const TileSchedule& schedule, const QMatrix* partial,
                     std::uint64_t* cycles) {
  require(a.cols == b.rows, ErrorKind::kArgument, "PE array operand shapes disagree");
  require(schedule.rows == a.rows && schedule.cols == b.cols && schedule.depth == a.cols,
          ErrorKind::kSchedule, "schedule does not match operand shapes");
  if (partial)
    require(partial->rows() == a.rows && partial->cols() == b.cols, ErrorKind::kArgument,
            "partial accumulator shape mismatch");
  validate_schedule(schedule);

  const std::size_t depth = a.cols;
  const std::size_t last_offset = (ceil_div(depth, kLanesPerPe) - 1) * kLanesPerPe;
  QMatrix out(a.rows, b.cols);
  std::array<std::int64_t, kPeCount> accumulator{};
  std::array<std::uint64_t, kPeCount> issues{};

  for (const auto& item : schedule.items) {
    std::array<std::int64_t, kLanesPerPe> lane_a{};
    std::array<std::int64_t, kLanesPerPe> lane_b{};
    for (std::size_t l = 0; l < kLanesPerPe && item.lane_offset + l < depth; ++l) {
      lane_a[l] = a.at(item.row, item.lane_offset + l);
      lane_b[l] = b.at(item.lane_offset + l, item.col);
    }
    std::int64_t& reg = accumulator[item.pe];
    if (item.lane_offset == 0) reg = partial ? (*partial)(item.row, item.col) : 0;
    reg = pe_dot16(lane_a, lane_b, reg, pa, pb, arith_);
    ++issues[item.pe];
    if (item.lane_offset == last_offset) out(item.row, item.col) = reg;
  }
  if (cycles) *cycles = *std::max_element(issues.begin(), issues.end());
  return out;
}

QMatrix matmul_qkv(const QMatrix& input, const QuantizedTensor& weights,
                   const TileSchedule& schedule, const QuantScheme& scheme,
                   std::uint64_t* cycles) {
  PeArray array(scheme.arith);
  return array.run(MatrixView::of(input), scheme.intermediate.frac_bits,
                   MatrixView::of(weights), weights.point(), schedule, nullptr, cycles);
}

QMatrix attention_score(const QMatrix& q, const QMatrix& k, const QuantScheme& scheme,
                        std::uint64_t* cycles) {
  require(q.cols() == k.cols() && q.rows() == k.rows(), ErrorKind::kArgument,
          "query and key shapes disagree");
  const std::size_t tokens = q.rows();
  const int fa = scheme.arith.frac_bits;
  const int fi = scheme.intermediate.frac_bits;
  PeArray array(scheme.arith);
  std::uint64_t pe_cycles = 0;
  const QMatrix logits =
      array.run(MatrixView::of(q), fi, MatrixView::transpose_of(k), fi,
                make_schedule(tokens, tokens, q.cols()), nullptr, &pe_cycles);

  // division/sqrt unit: 1/sqrt(k) once, then one multiply per score
  const std::int64_t scale =
      qsqrt_recip(static_cast<std::int64_t>(q.cols()), FixedFormat::make(32, 0), scheme.arith);
  QMatrix score(tokens, tokens);
  std::vector<std::int64_t> row(tokens);
  for (std::size_t i = 0; i < tokens; ++i) {
    for (std::size_t j = 0; j < tokens; ++j) row[j] = qmul(logits(i, j), fa, scale, fa, scheme.arith);
    const auto p = qsoftmax(row, scheme.arith, scheme.softmax);
    std::copy(p.begin(), p.end(), score.row(i).begin());
  }
  if (cycles) *cycles = pe_cycles + scale_cycles(tokens) + softmax_cycles(tokens);
  return score;
}

QMatrix head_output(const QMatrix& score, const QMatrix& v, const QuantScheme& scheme,
                    const QMatrix* partial, std::uint64_t* cycles) {
  require(score.cols() == v.rows(), ErrorKind::kArgument, "score and value shapes disagree");
  PeArray array(scheme.arith);
  return array.run(MatrixView::of(score), scheme.softmax.frac_bits, MatrixView::of(v),
                   scheme.intermediate.frac_bits, make_schedule(score.rows(), v.cols(), v.rows()),
                   partial, cycles);
}

namespace {

class Simulator {
 public:
  explicit Simulator(const QuantizedModel& model)
      : model_(model), scheme_(model.scheme), array_(model.scheme.arith) {}

  QMatrix run_line(const TofTensor& tensor, std::size_t col) {
    const auto& config = model_.config;
    QMatrix h = quantize_line_tokens(tensor, col, model_);
    for (std::size_t i = 0; i < model_.encoder.size(); ++i) {
      const auto act = i + 1 < model_.encoder.size() ? Activation::kRelu : Activation::kNone;
      h = dense("encoder." + std::to_string(i), h, model_.encoder[i], act);
      if (h.rows() == 1 && config.patches > 1)
        h = QMatrix(config.patches, h.cols() / config.patches, h.data());
    }
    for (std::size_t b = 0; b < model_.blocks.size(); ++b)
      h = block("block." + std::to_string(b), h, model_.blocks[b]);
    for (std::size_t i = 0; i < model_.decoder.size(); ++i) {
      const auto act = i + 1 < model_.decoder.size() ? Activation::kRelu : Activation::kNone;
      h = dense("decoder." + std::to_string(i), h, model_.decoder[i], act);
    }
    return QMatrix(config.rows(), 2, h.data());
  }

  CycleReport& report() { return report_; }

 private:
  QMatrix dense(const std::string& name, const QMatrix& x, const QDense& layer,
                Activation act) {
    std::uint64_t cycles = 0;
    const auto schedule = make_schedule(x.rows(), layer.w.cols, layer.w.rows);
    const QMatrix acc = array_.run(MatrixView::of(x), scheme_.intermediate.frac_bits,
                                   MatrixView::of(layer.w), layer.w.point(), schedule, nullptr,
                                   &cycles);
    report_.add(name, cycles, x.rows() * layer.w.rows * layer.w.cols, schedule.items.size());
    return output_unit(acc, &layer.b, act, scheme_);
  }

  QMatrix block(const std::string& name, const QMatrix& x, const QBlock& blk) {
    const std::uint64_t tokens = x.rows();
    const std::uint64_t width = x.cols();

    const QMatrix xn = norm_unit(x, blk.norm1, model_.epsilon_units, scheme_);
    report_.add(name + ".norm1", norm_cycles(tokens, width), 0, 0);

    const std::size_t k = blk.heads.front().query.w.cols;
    QMatrix concat(tokens, k * blk.heads.size());
    for (std::size_t h = 0; h < blk.heads.size(); ++h) {
      const auto& head = blk.heads[h];
      const std::string hn = name + ".head." + std::to_string(h);
      const auto qkv_schedule = make_schedule(tokens, k, width);
      std::array<QMatrix, 3> qkv;
      std::uint64_t qkv_cycles = 0;
      const std::array<const QDense*, 3> proj{&head.query, &head.key, &head.value};
      for (std::size_t p = 0; p < 3; ++p) {
        std::uint64_t c = 0;
        qkv[p] = output_unit(matmul_qkv(xn, proj[p]->w, qkv_schedule, scheme_, &c),
                             &proj[p]->b, Activation::kNone, scheme_);
        qkv_cycles += c;
      }
      report_.add(hn + ".qkv", qkv_cycles, 3 * tokens * width * k, 3 * qkv_schedule.items.size());

      std::uint64_t score_cycles = 0;
      const QMatrix score = attention_score(qkv[0], qkv[1], scheme_, &score_cycles);
      report_.add(hn + ".score", score_cycles, tokens * tokens * k,
                  make_schedule(tokens, tokens, k).items.size());

      std::uint64_t out_cycles = 0;
      const QMatrix acc = head_output(score, qkv[2], scheme_, nullptr, &out_cycles);
      report_.add(hn + ".output", out_cycles, tokens * tokens * k,
                  make_schedule(tokens, k, tokens).items.size());
      const QMatrix head_out = output_unit(acc, nullptr, Activation::kNone, scheme_);
      for (std::size_t i = 0; i < tokens; ++i)
        std::copy(head_out.row(i).begin(), head_out.row(i).end(), &concat(i, h * k));
    }

    const QMatrix attn = dense(name + ".attention.output", concat, blk.output, Activation::kNone);
    const QMatrix u = residual_unit(x, attn, scheme_);
    report_.add(name + ".residual1", tokens * width, 0, 0);

    const QMatrix un = norm_unit(u, blk.norm2, model_.epsilon_units, scheme_);
    report_.add(name + ".norm2", norm_cycles(tokens, width), 0, 0);
    const QMatrix hidden = dense(name + ".mlp1", un, blk.mlp1, Activation::kRelu);
    const QMatrix mlp = dense(name + ".mlp2", hidden, blk.mlp2, Activation::kNone);
    const QMatrix y = residual_unit(u, mlp, scheme_);
    report_.add(name + ".residual2", tokens * width, 0, 0);
    return y;
  }

  const QuantizedModel& model_;
  const QuantScheme& scheme_;
  PeArray array_;
  CycleReport report_;
};

}  // namespace

SimResult simulate_model(const TofTensor& tensor, const QuantizedModel& model) {
  SimResult result;
  result.image.fmt = model.scheme.intermediate;
  result.image.grid = tensor.grid;
  result.image.units = QMatrix(tensor.rows(), 2 * tensor.cols());
  Simulator sim(model);
  for (std::size_t col = 0; col < tensor.cols(); ++col) {
    const QMatrix iq = sim.run_line(tensor, col);
    for (std::size_t r = 0; r < iq.rows(); ++r) {
      result.image.units(r, 2 * col) = iq(r, 0);
      result.image.units(r, 2 * col + 1) = iq(r, 1);
    }
  }
  result.report = std::move(sim.report());
  result.report.lateral_lines = tensor.cols();
  return result;
}

SimResult simulate_model(const TofTensor& tensor, const ModelWeights& weights,
                         const ModelConfig& config, const QuantScheme& scheme) {
  return simulate_model(tensor, quantize_model(weights, config, scheme));
}

CycleReport estimate_cycles(const ModelConfig& config, std::size_t lateral_lines) {
  config.validate();
  CycleReport report;
  report.lateral_lines = lateral_lines;
  const std::uint64_t np = config.patches;
  const std::uint64_t d = config.d_model;
  const std::uint64_t k = config.head_dim();
  const std::uint64_t m = config.mlp_width;
  const auto dense = [&](const std::string& name, std::uint64_t rows, std::uint64_t in,
                         std::uint64_t out) {
    report.add(name, matmul_cycles(rows, out, in), rows * in * out,
               ceil_div(rows * out, 1) * ceil_div(in, kLanesPerPe));
  };

  for (std::size_t line = 0; line < lateral_lines; ++line) {
    const auto enc = encoder_shapes(config);
    for (std::size_t i = 0; i < enc.size(); ++i)
      dense("encoder." + std::to_string(i), enc[i].rows, enc[i].in, enc[i].out);
    for (std::size_t b = 0; b < kTransformerBlocks; ++b) {
      const std::string name = "block." + std::to_string(b);
      report.add(name + ".norm1", norm_cycles(np, d), 0, 0);
      for (std::size_t h = 0; h < config.heads; ++h) {
        const std::string hn = name + ".head." + std::to_string(h);
        report.add(hn + ".qkv", 3 * matmul_cycles(np, k, d), 3 * np * d * k,
                   3 * np * k * ceil_div(d, kLanesPerPe));
        report.add(hn + ".score",
                   matmul_cycles(np, np, k) + scale_cycles(np) + softmax_cycles(np),
                   np * np * k, np * np * ceil_div(k, kLanesPerPe));
        report.add(hn + ".output", matmul_cycles(np, k, np), np * np * k,
                   np * k * ceil_div(np, kLanesPerPe));
      }
      dense(name + ".attention.output", np, d, d);
      report.add(name + ".residual1", np * d, 0, 0);
      report.add(name + ".norm2", norm_cycles(np, d), 0, 0);
      dense(name + ".mlp1", np, d, m);
      dense(name + ".mlp2", np, m, d);
      report.add(name + ".residual2", np * d, 0, 0);
    }
    const auto dec = decoder_shapes(config);
    for (std::size_t i = 0; i < dec.size(); ++i)
      dense("decoder." + std::to_string(i), dec[i].rows, dec[i].in, dec[i].out);
  }
  return report;
}

}  // namespace tvbf::accel
