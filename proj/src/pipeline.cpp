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


#include "tvbf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tvbf/beamform.hpp"
#include "tvbf/error.hpp"
#include "tvbf/model.hpp"
#include "tvbf/qforward.hpp"
#include "tvbf/quant.hpp"
#include "tvbf/tof.hpp"

namespace tvbf {

namespace {

constexpr double kMm = 1e-3;

IQImage analytic(const IQImage& real_image) {
  return IQImage{analytic_signal(real_part(real_image)), real_image.grid};
}

IQImage run_vbf(const TofTensor& tensor, const PipelineConfig& config,
                std::optional<accel::CycleReport>& cycles) {
  const auto model = load_weights(config.weights);
  require(model.config.rows() == tensor.rows(), ErrorKind::kConfig,
          "model covers " + std::to_string(model.config.rows()) + " rows but the grid has " +
              std::to_string(tensor.rows()));
  require(model.config.input_channels == tensor.channels(), ErrorKind::kConfig,
          "model expects " + std::to_string(model.config.input_channels) + " channels");
  const auto scheme = QuantScheme::from_name(config.scheme);
  if (!scheme) return vbf_forward(tensor, model.weights, model.config);
  const auto qmodel = quantize_model(model.weights, model.config, *scheme);
  if (config.engine == Engine::kReference) return qforward_units(tensor, qmodel).to_iq();
  auto sim = accel::simulate_model(tensor, qmodel);
  cycles = std::move(sim.report);
  return sim.image.to_iq();
}

std::vector<double> parse_numbers(const std::string& text, std::size_t count,
                                  const std::string& what) {
  std::istringstream in(text);
  std::vector<double> v;
  double x = 0.0;
  while (in >> x) v.push_back(x);
  require(in.eof() && v.size() == count, ErrorKind::kConfig,
          what + ": expected " + std::to_string(count) + " numbers");
  return v;
}

RegionSpec parse_region(const std::string& text, RegionRole role, const std::string& key) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  std::string rest;
  std::getline(in, rest);
  if (kind == "circle") {
    const auto v = parse_numbers(rest, 3, key);
    return RegionSpec::circle(v[0] * kMm, v[1] * kMm, v[2] * kMm, role);
  }
  if (kind == "ring") {
    const auto v = parse_numbers(rest, 4, key);
    return RegionSpec::ring(v[0] * kMm, v[1] * kMm, v[2] * kMm, v[3] * kMm, role);
  }
  if (kind == "rect") {
    const auto v = parse_numbers(rest, 4, key);
    return RegionSpec::rectangle(v[0] * kMm, v[1] * kMm, v[2] * kMm, v[3] * kMm, role);
  }
  fail(ErrorKind::kConfig, key + ": region kind must be circle, ring or rect");
}

std::optional<double> try_fwhm(const PsfProfile& profile) {
  try {
    return fwhm(profile);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumeric) throw;
    return std::nullopt;
  }
}

std::string number(double v) {
  std::ostringstream out;
  out.precision(9);
  out << v;
  return out.str();
}

std::string optional_mm(const std::optional<double>& v) {
  return v ? number(*v / kMm) : "undefined";
}

void append_metrics(std::ostringstream& out, const std::string& prefix, const ImageMetrics& m) {
  out << prefix << ".name = " << m.name << "\n";
  if (m.cr_db) out << prefix << ".cr_db = " << number(*m.cr_db) << "\n";
  if (m.cnr) {
    out << prefix << ".cnr = " << number(m.cnr->value) << "\n";
    out << prefix << ".cnr_capped = " << (m.cnr->capped ? "true" : "false") << "\n";
  }
  if (m.gcnr) out << prefix << ".gcnr = " << number(*m.gcnr) << "\n";
  for (std::size_t i = 0; i < m.depths.size(); ++i) {
    const auto& d = m.depths[i];
    const std::string p = prefix + ".depth." + std::to_string(i);
    out << p << ".depth_mm = " << number(d.depth_m / kMm) << "\n";
    out << p << ".lateral_fwhm_mm = " << optional_mm(d.lateral_fwhm_m) << "\n";
    out << p << ".axial_fwhm_mm = " << optional_mm(d.axial_fwhm_m) << "\n";
  }
}

}  // namespace

BeamformerKind parse_beamformer(const std::string& name) {
  if (name == "das") return BeamformerKind::kDas;
  if (name == "mvdr") return BeamformerKind::kMvdr;
  if (name == "vbf") return BeamformerKind::kVbf;
  fail(ErrorKind::kConfig, "unknown beamformer: " + name);
}

std::string to_string(BeamformerKind kind) {
  switch (kind) {
    case BeamformerKind::kDas: return "das";
    case BeamformerKind::kMvdr: return "mvdr";
    case BeamformerKind::kVbf: return "vbf";
  }
  return "unknown";
}

Engine parse_engine(const std::string& name) {
  if (name == "reference") return Engine::kReference;
  if (name == "accel-sim") return Engine::kAccelSim;
  fail(ErrorKind::kConfig, "unknown engine: " + name);
}

std::string to_string(Engine engine) {
  return engine == Engine::kReference ? "reference" : "accel-sim";
}

PipelineConfig PipelineConfig::from_keyvalues(const KeyValues& kv) {
  PipelineConfig c;
  c.input = kv.get("input", "");
  c.output_dir = kv.get("output_dir", c.output_dir.string());
  c.weights = kv.get("weights", "");
  c.regions = kv.get("regions", "");
  c.grid = kv.get("grid", c.grid);
  c.beamformer = parse_beamformer(kv.get("beamformer", "das"));
  c.scheme = kv.get("scheme", c.scheme);
  c.engine = parse_engine(kv.get("engine", "reference"));
  c.display.dynamic_range_db = kv.get_double("dynamic_range", c.display.dynamic_range_db);
  const auto format = kv.get("image_format", "png");
  require(format == "png" || format == "pgm", ErrorKind::kConfig,
          "image_format must be png or pgm");
  c.display.format = format == "png" ? ImageFormat::kPng : ImageFormat::kPgm;
  if (kv.has("depths"))
    for (double d : kv.get_doubles("depths")) c.depths_m.push_back(d * kMm);
  return c;
}

void PipelineConfig::validate() const {
  display.validate();
  QuantScheme::from_name(scheme);
  if (beamformer == BeamformerKind::kVbf)
    require(!weights.empty(), ErrorKind::kConfig, "beamformer vbf requires --weights");
  else
    require(scheme == "float", ErrorKind::kConfig,
            "quantization schemes apply to the vbf beamformer only");
  require(engine == Engine::kReference || scheme != "float", ErrorKind::kConfig,
          "engine accel-sim needs a quantized scheme");
}

std::string PipelineConfig::output_stem() const {
  return to_string(beamformer) + "-" + scheme;
}

BeamformResult beamform_frame(const RfFrame& frame, const PixelGrid& grid,
                              const PipelineConfig& config) {
  config.validate();
  const TofTensor tensor = tof_correct(frame, build_delay_table(grid, frame.geometry, frame.acq));
  BeamformResult result;
  switch (config.beamformer) {
    case BeamformerKind::kDas:
      result.iq = analytic(das(tensor));
      break;
    case BeamformerKind::kMvdr:
      result.iq = analytic(mvdr(tensor, MvdrParams::defaults(tensor.channels())));
      break;
    case BeamformerKind::kVbf:
      result.iq = run_vbf(tensor, config, result.cycles);
      break;
  }
  result.bmode = log_compress(envelope(result.iq), config.display.dynamic_range_db, grid);
  return result;
}

BeamformResult run_beamform(const PipelineConfig& config) {
  config.validate();
  require(!config.input.empty(), ErrorKind::kConfig, "an input file is required");
  const RfFrame frame = load_rf(config.input);
  const PixelGrid grid = grid_preset(config.grid, frame.geometry, frame.acq);
  auto result = beamform_frame(frame, grid, config);

  std::filesystem::create_directories(config.output_dir);
  const auto stem = config.output_dir / config.output_stem();
  save_iq(result.iq, stem.string() + ".iqf");
  const char* ext = config.display.format == ImageFormat::kPng ? ".png" : ".pgm";
  write_image(result.bmode, config.display, stem.string() + ext);
  if (result.cycles) {
    std::ofstream out(stem.string() + ".cycles.txt");
    out << result.cycles->to_text();
    require(static_cast<bool>(out), ErrorKind::kIo, "cannot write cycle report");
  }
  return result;
}

RegionPair parse_regions(const KeyValues& kv) {
  require(kv.has("inside") && kv.has("outside"), ErrorKind::kConfig,
          "regions need both 'inside' and 'outside'");
  return RegionPair{parse_region(kv.get("inside"), RegionRole::kInside, "inside"),
                    parse_region(kv.get("outside"), RegionRole::kOutside, "outside")};
}

RegionPair load_regions(const std::filesystem::path& path) {
  return parse_regions(KeyValues::load(path));
}

ImageMetrics measure(const std::string& name, const BModeImage& bmode,
                     const std::optional<RegionPair>& regions,
                     const std::vector<double>& depths_m) {
  ImageMetrics m;
  m.name = name;
  if (regions) {
    const auto inside = region_pixels(bmode, regions->inside);
    const auto outside = region_pixels(bmode, regions->outside);
    m.cr_db = cr(inside, outside);
    m.cnr = cnr(inside, outside);
    m.gcnr = gcnr(inside, outside);
  }
  for (double depth : depths_m) {
    DepthMetrics d;
    d.depth_m = depth;
    const auto lateral = lateral_profile(bmode, depth);
    d.lateral_fwhm_m = try_fwhm(lateral);
    const auto peak = std::max_element(lateral.amplitude_db.begin(), lateral.amplitude_db.end());
    const double x = lateral.positions_m[static_cast<std::size_t>(peak - lateral.amplitude_db.begin())];
    d.axial_fwhm_m = try_fwhm(axial_profile(bmode, x));
    m.depths.push_back(d);
  }
  return m;
}

std::string format_metrics(const std::vector<ImageMetrics>& rows) {
  std::ostringstream out;
  out << "# metrics report: CR in dB, CNR and GCNR unitless, FWHM in mm\n";
  out << "count = " << rows.size() << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) append_metrics(out, "image." + std::to_string(i), rows[i]);
  return out.str();
}

std::vector<CompareRow> run_compare(const std::vector<PipelineConfig>& configs) {
  require(configs.size() >= 2, ErrorKind::kConfig, "compare needs at least two configurations");
  for (const auto& c : configs) {
    c.validate();
    require(!c.input.empty(), ErrorKind::kConfig, "an input file is required");
    require(c.input == configs.front().input && c.grid == configs.front().grid,
            ErrorKind::kConfig, "compared configurations must share input and grid");
  }
  std::optional<RegionPair> regions;
  if (!configs.front().regions.empty()) regions = load_regions(configs.front().regions);

  const RfFrame frame = load_rf(configs.front().input);
  const PixelGrid grid = grid_preset(configs.front().grid, frame.geometry, frame.acq);
  std::vector<BeamformResult> results;
  for (const auto& c : configs) results.push_back(beamform_frame(frame, grid, c));

  std::size_t base = 0;
  for (std::size_t i = 0; i < configs.size(); ++i)
    if (configs[i].scheme == "float") {
      base = i;
      break;
    }

  std::vector<CompareRow> rows;
  const auto& ref = results[base].iq.pixels;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& px = results[i].iq.pixels;
    CompareRow row;
    row.name = configs[i].output_stem() + "@" + to_string(configs[i].engine);
    row.baseline = i == base;
    double sq = 0.0;
    for (std::size_t p = 0; p < px.size(); ++p) {
      const double e = std::abs(px.data()[p] - ref.data()[p]);
      row.max_abs_error = std::max(row.max_abs_error, e);
      sq += e * e;
    }
    row.rms_error = std::sqrt(sq / static_cast<double>(px.size()));
    row.metrics = measure(row.name, results[i].bmode, regions, configs[i].depths_m);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_compare(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  out << "# compare report: IQ error against the baseline row, metrics as in the metrics report\n";
  out << "count = " << rows.size() << "\n";
  const auto base_row = std::find_if(rows.begin(), rows.end(),
                                     [](const CompareRow& r) { return r.baseline; });
  const ImageMetrics& base = (base_row == rows.end() ? rows.front() : *base_row).metrics;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string p = "row." + std::to_string(i);
    out << p << ".baseline = " << (r.baseline ? "true" : "false") << "\n";
    out << p << ".max_abs_error = " << number(r.max_abs_error) << "\n";
    out << p << ".rms_error = " << number(r.rms_error) << "\n";
    append_metrics(out, p, r.metrics);
    if (r.metrics.cr_db && base.cr_db)
      out << p << ".delta_cr_db = " << number(*r.metrics.cr_db - *base.cr_db) << "\n";
    if (r.metrics.cnr && base.cnr)
      out << p << ".delta_cnr = " << number(r.metrics.cnr->value - base.cnr->value) << "\n";
    if (r.metrics.gcnr && base.gcnr)
      out << p << ".delta_gcnr = " << number(*r.metrics.gcnr - *base.gcnr) << "\n";
  }
  return out.str();
}

}  // namespace tvbf
