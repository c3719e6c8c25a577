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


// tvbf: synthetic data, beamforming, metrics and accelerator cycle reports.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "tvbf/accel.hpp"
#include "tvbf/error.hpp"
#include "tvbf/keyvalue.hpp"
#include "tvbf/model.hpp"
#include "tvbf/phantom.hpp"
#include "tvbf/pipeline.hpp"
#include "tvbf/postproc.hpp"
#include "tvbf/qforward.hpp"
#include "tvbf/tof.hpp"

namespace {

using tvbf::ErrorKind;
using tvbf::KeyValues;

constexpr double kMm = 1e-3;

// Flag values, empty when not given on the command line.
struct Flags {
  std::string config;
  std::vector<std::string> inputs;
  std::string output_dir;
  std::string output;
  std::string beamformer;
  std::string scheme;
  std::string engine;
  std::string weights;
  std::string grid;
  std::string regions;
  std::string depths;
  std::string dynamic_range;
  std::string image_format;
  std::string model_config;
  std::string schemes;
  std::string phantom = "point";
  std::string scatterers;
  std::string cyst;
  std::size_t scatterer_count = 4000;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> configs;
};

// Config file entries overridden by whichever flags were given.
KeyValues merged(const Flags& f, const std::string& config_path) {
  KeyValues kv = config_path.empty() ? KeyValues{} : KeyValues::load(config_path);
  const auto put = [&kv](const char* key, const std::string& v) {
    if (!v.empty()) kv.set(key, v);
  };
  if (!f.inputs.empty()) kv.set("input", f.inputs.front());
  put("output_dir", f.output_dir);
  put("beamformer", f.beamformer);
  put("scheme", f.scheme);
  put("engine", f.engine);
  put("weights", f.weights);
  put("grid", f.grid);
  put("regions", f.regions);
  put("depths", f.depths);
  put("dynamic_range", f.dynamic_range);
  put("image_format", f.image_format);
  put("model_config", f.model_config);
  return kv;
}

std::vector<tvbf::Scatterer> parse_scatterers(const std::string& text) {
  std::vector<tvbf::Scatterer> out;
  for (const auto& item : tvbf::split(text, ';')) {
    const auto parts = tvbf::split(item, ',');
    tvbf::require(parts.size() == 2 || parts.size() == 3, ErrorKind::kConfig,
                  "scatterer must be 'depth_mm,lateral_mm[,amplitude]': " + item);
    tvbf::Scatterer s;
    try {
      s.axial_m = std::stod(parts[0]) * kMm;
      s.lateral_m = std::stod(parts[1]) * kMm;
      if (parts.size() == 3) s.amplitude = std::stod(parts[2]);
    } catch (const std::exception&) {
      tvbf::fail(ErrorKind::kConfig, "bad scatterer: " + item);
    }
    out.push_back(s);
  }
  return out;
}

tvbf::CystSpec parse_cyst(const std::string& text, std::size_t count) {
  const auto parts = tvbf::split(text, ',');
  tvbf::require(parts.size() == 3, ErrorKind::kConfig,
                "cyst must be 'depth_mm,lateral_mm,radius_mm'");
  tvbf::CystSpec c;
  try {
    c.axial_m = std::stod(parts[0]) * kMm;
    c.lateral_m = std::stod(parts[1]) * kMm;
    c.radius_m = std::stod(parts[2]) * kMm;
  } catch (const std::exception&) {
    tvbf::fail(ErrorKind::kConfig, "bad cyst spec: " + text);
  }
  c.scatterer_count = count;
  return c;
}

void emit(const std::string& report, const std::string& dir, const std::string& name) {
  std::cout << report;
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / name);
  out << report;
  tvbf::require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + name);
}

void make_parent(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
}

void cmd_synth(const Flags& f) {
  const KeyValues kv = merged(f, f.config);
  const auto geometry = tvbf::ProbeGeometry::default_preset();
  const tvbf::AcquisitionParams acq;
  const auto grid = tvbf::grid_preset(kv.get("grid", "small"), geometry, acq);
  tvbf::PhantomOptions options;
  options.noise_stddev = f.noise;
  options.seed = f.seed;

  tvbf::RfFrame frame;
  if (f.phantom == "point") {
    const std::string list = f.scatterers.empty()
                                 ? kv.get("scatterers", "9.5,0")
                                 : f.scatterers;
    const auto scatterers = list == "none" ? std::vector<tvbf::Scatterer>{}
                                           : parse_scatterers(list);
    frame = tvbf::point_phantom(grid, geometry, acq, scatterers, options);
  } else if (f.phantom == "cyst") {
    const std::string spec = f.cyst.empty() ? kv.get("cyst", "9.56,0,1.2") : f.cyst;
    frame = tvbf::cyst_phantom(grid, geometry, acq, parse_cyst(spec, f.scatterer_count), options);
  } else {
    tvbf::fail(ErrorKind::kConfig, "phantom must be 'point' or 'cyst'");
  }

  std::filesystem::path out = f.output;
  if (out.empty()) {
    const std::filesystem::path dir = kv.get("output_dir", ".");
    std::filesystem::create_directories(dir);
    out = dir / (f.phantom + ".rfd");
  }
  make_parent(out);
  tvbf::save_rf(frame, out);
  std::cout << "wrote " << out.string() << " (" << frame.channel_count() << " channels x "
            << frame.sample_count() << " samples)\n";
}

void cmd_beamform(const Flags& f) {
  const auto config = tvbf::PipelineConfig::from_keyvalues(merged(f, f.config));
  const auto result = tvbf::run_beamform(config);
  std::cout << "wrote " << (config.output_dir / config.output_stem()).string() << ".iqf ("
            << result.iq.pixels.rows() << " x " << result.iq.pixels.cols() << ")\n";
}

void cmd_metrics(const Flags& f) {
  const KeyValues kv = merged(f, f.config);
  const auto config = tvbf::PipelineConfig::from_keyvalues(kv);
  std::vector<std::string> inputs = f.inputs;
  if (inputs.empty() && kv.has("input")) inputs.push_back(kv.get("input"));
  tvbf::require(!inputs.empty(), ErrorKind::kConfig, "metrics needs at least one --input");
  std::optional<tvbf::RegionPair> regions;
  if (!config.regions.empty()) regions = tvbf::load_regions(config.regions);

  std::vector<tvbf::ImageMetrics> rows;
  for (const auto& path : inputs) {
    const auto iq = tvbf::load_iq(path);
    const auto bmode =
        tvbf::log_compress(tvbf::envelope(iq), config.display.dynamic_range_db, iq.grid);
    rows.push_back(tvbf::measure(path, bmode, regions, config.depths_m));
  }
  emit(tvbf::format_metrics(rows), f.output_dir, "metrics.txt");
}

void cmd_compare(const Flags& f) {
  std::vector<tvbf::PipelineConfig> configs;
  for (const auto& path : f.configs)
    configs.push_back(tvbf::PipelineConfig::from_keyvalues(merged(f, path)));
  if (!f.schemes.empty()) {
    const KeyValues base = merged(f, f.config);
    for (const auto& scheme : tvbf::split(f.schemes, ',')) {
      KeyValues kv = base;
      kv.set("scheme", scheme);
      if (scheme == "float") kv.set("engine", "reference");
      configs.push_back(tvbf::PipelineConfig::from_keyvalues(kv));
    }
  }
  emit(tvbf::format_compare(tvbf::run_compare(configs)), f.output_dir, "compare.txt");
}

void cmd_cycles(const Flags& f) {
  const KeyValues kv = merged(f, f.config);
  const auto geometry = tvbf::ProbeGeometry::default_preset();
  const tvbf::AcquisitionParams acq;
  const auto grid_name = kv.get("grid", "frame");

  if (kv.has("input") && kv.has("weights")) {
    const auto model = tvbf::load_weights(kv.get("weights"));
    const auto scheme = tvbf::QuantScheme::from_name(kv.get("scheme", "hybrid1"));
    tvbf::require(scheme.has_value(), ErrorKind::kConfig, "cycles needs a quantized scheme");
    const auto frame = tvbf::load_rf(kv.get("input"));
    const auto grid = tvbf::grid_preset(grid_name, frame.geometry, frame.acq);
    const auto tensor =
        tvbf::tof_correct(frame, tvbf::build_delay_table(grid, frame.geometry, frame.acq));
    const auto sim = tvbf::accel::simulate_model(tensor, model.weights, model.config, *scheme);
    emit(sim.report.to_text(), f.output_dir, "cycles.txt");
    return;
  }
  const auto config = kv.has("model_config")
                          ? tvbf::ModelConfig::load(kv.get("model_config"))
                          : tvbf::ModelConfig::default_config();
  const auto grid = tvbf::grid_preset(grid_name, geometry, acq);
  emit(tvbf::accel::estimate_cycles(config, grid.cols()).to_text(), f.output_dir, "cycles.txt");
}

void cmd_init_weights(const Flags& f) {
  const KeyValues kv = merged(f, f.config);
  const auto config = kv.has("model_config") ? tvbf::ModelConfig::load(kv.get("model_config"))
                                             : tvbf::ModelConfig::default_config();
  tvbf::require(!f.output.empty(), ErrorKind::kConfig, "init-weights needs --output");
  make_parent(f.output);
  tvbf::save_weights(tvbf::random_weights(config, f.seed), config, f.output);
  std::cout << "wrote " << f.output << " (" << tvbf::param_count(config) << " parameters)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tvbf: plane-wave beamforming, quantized transformer inference and "
               "accelerator simulation"};
  app.require_subcommand(1);
  Flags f;

  const auto common = [&f](CLI::App* cmd) {
    cmd->add_option("--config", f.config, "key = value file; flags override its entries");
    cmd->add_option("--output-dir", f.output_dir, "directory for output files");
  };
  const auto pipeline = [&f](CLI::App* cmd) {
    cmd->add_option("--beamformer", f.beamformer, "das, mvdr or vbf");
    cmd->add_option("--scheme", f.scheme, "float, q24, q20, q16, hybrid1 or hybrid2");
    cmd->add_option("--engine", f.engine, "reference or accel-sim");
    cmd->add_option("--weights", f.weights, "TVBF weight file (vbf only)");
    cmd->add_option("--grid", f.grid, "grid preset: frame, small or psf");
    cmd->add_option("--regions", f.regions, "region file for contrast metrics");
    cmd->add_option("--depths", f.depths, "comma-separated depths in mm for FWHM");
    cmd->add_option("--dynamic-range", f.dynamic_range, "display dynamic range in dB");
    cmd->add_option("--image-format", f.image_format, "png or pgm");
  };

  auto* synth = app.add_subcommand("synth", "write a synthetic RFD1 phantom");
  common(synth);
  synth->add_option("--phantom", f.phantom, "point or cyst")->capture_default_str();
  synth->add_option("--scatterers", f.scatterers,
                    "'depth_mm,lateral_mm[,amp];...' or 'none' (point phantom)");
  synth->add_option("--cyst", f.cyst, "'depth_mm,lateral_mm,radius_mm' (cyst phantom)");
  synth->add_option("--scatterer-count", f.scatterer_count, "speckle scatterers (cyst phantom)")
      ->capture_default_str();
  synth->add_option("--noise", f.noise, "white noise standard deviation")->capture_default_str();
  synth->add_option("--seed", f.seed, "random seed")->capture_default_str();
  synth->add_option("--grid", f.grid, "grid preset sizing the record (frame, small or psf)");
  synth->add_option("--output", f.output, "output file (default <output-dir>/<phantom>.rfd)");

  auto* beamform = app.add_subcommand("beamform", "beamform an RFD1 file to IQF1 and B-mode");
  common(beamform);
  pipeline(beamform);
  beamform->add_option("--input", f.inputs, "RFD1 input")->expected(1);

  auto* metrics = app.add_subcommand("metrics", "contrast and resolution report for IQF1 dumps");
  common(metrics);
  pipeline(metrics);
  metrics->add_option("--input", f.inputs, "IQF1 input (repeatable)");

  auto* compare = app.add_subcommand("compare", "IQ error and metric deltas across configs");
  common(compare);
  pipeline(compare);
  compare->add_option("--input", f.inputs, "RFD1 input")->expected(1);
  compare->add_option("--schemes", f.schemes, "comma-separated schemes to run on one config");
  compare->add_option("configs", f.configs, "pipeline config files");

  auto* cycles = app.add_subcommand("cycles", "accelerator cycle report");
  common(cycles);
  pipeline(cycles);
  cycles->add_option("--input", f.inputs, "RFD1 input; with --weights runs the simulator")
      ->expected(1);
  cycles->add_option("--model-config", f.model_config, "model config for the estimate");

  auto* init = app.add_subcommand("init-weights", "write seeded random TVBF weights");
  common(init);
  init->add_option("--model-config", f.model_config, "model config (default: shipped)");
  init->add_option("--seed", f.seed, "random seed")->capture_default_str();
  init->add_option("--output", f.output, "output TVBF file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : tvbf::exit_code(ErrorKind::kConfig);
  }

  try {
    if (*synth) cmd_synth(f);
    if (*beamform) cmd_beamform(f);
    if (*metrics) cmd_metrics(f);
    if (*compare) cmd_compare(f);
    if (*cycles) cmd_cycles(f);
    if (*init) cmd_init_weights(f);
  } catch (const tvbf::Error& e) {
    std::cerr << "error (" << tvbf::to_string(e.kind()) << "): " << e.what() << "\n";
    return tvbf::exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return tvbf::exit_code(ErrorKind::kIo);
  }
  return 0;
}
