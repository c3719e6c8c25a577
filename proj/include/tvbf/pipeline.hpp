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


#ifndef TVBF_PIPELINE_HPP
#define TVBF_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tvbf/accel.hpp"
#include "tvbf/core_data.hpp"
#include "tvbf/keyvalue.hpp"
#include "tvbf/metrics.hpp"
#include "tvbf/postproc.hpp"

namespace tvbf {

enum class BeamformerKind { kDas, kMvdr, kVbf };
enum class Engine { kReference, kAccelSim };

BeamformerKind parse_beamformer(const std::string& name);
std::string to_string(BeamformerKind kind);
Engine parse_engine(const std::string& name);
std::string to_string(Engine engine);

struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path output_dir = ".";
  std::filesystem::path weights;
  std::filesystem::path regions;
  std::string grid = "small";
  BeamformerKind beamformer = BeamformerKind::kDas;
  std::string scheme = "float";
  Engine engine = Engine::kReference;
  DisplayParams display;
  std::vector<double> depths_m;

  /// Keys match the long CLI flags with '-' replaced by '_'. Depths are in mm.
  static PipelineConfig from_keyvalues(const KeyValues& kv);
  /// Throws kConfig for combinations that cannot run.
  void validate() const;
  /// File stem for outputs, e.g. "vbf-hybrid1".
  std::string output_stem() const;
};

struct BeamformResult {
  IQImage iq;
  BModeImage bmode;
  std::optional<accel::CycleReport> cycles;  // set for engine=accel-sim
};

/// ToF correction on `grid`, then the configured beamformer. DAS and MVDR
/// outputs are made analytic along depth so |IQ| is the envelope.
BeamformResult beamform_frame(const RfFrame& frame, const PixelGrid& grid,
                              const PipelineConfig& config);

/// Reads `config.input`, beamforms on the configured grid preset and writes
/// <stem>.iqf, the B-mode image, and <stem>.cycles.txt for accel-sim.
BeamformResult run_beamform(const PipelineConfig& config);

struct RegionPair {
  RegionSpec inside;
  RegionSpec outside;
};

/// `inside = circle Z X R`, `outside = ring Z X R_IN R_OUT` or
/// `rect Z X HALF_Z HALF_X`; all lengths in mm.
RegionPair parse_regions(const KeyValues& kv);
RegionPair load_regions(const std::filesystem::path& path);

struct DepthMetrics {
  double depth_m = 0.0;
  std::optional<double> lateral_fwhm_m;
  std::optional<double> axial_fwhm_m;
};

struct ImageMetrics {
  std::string name;
  std::optional<double> cr_db;
  std::optional<CnrValue> cnr;
  std::optional<double> gcnr;
  std::vector<DepthMetrics> depths;
};

/// Contrast metrics over `regions` and, per depth, lateral FWHM along the
/// row and axial FWHM down the column through that row's peak.
ImageMetrics measure(const std::string& name, const BModeImage& bmode,
                     const std::optional<RegionPair>& regions,
                     const std::vector<double>& depths_m);

std::string format_metrics(const std::vector<ImageMetrics>& rows);

struct CompareRow {
  std::string name;
  double max_abs_error = 0.0;
  double rms_error = 0.0;
  bool baseline = false;
  ImageMetrics metrics;
};

/// Runs every config on a shared input and grid and reports IQ error against
/// the first float config (or the first config when none is float).
std::vector<CompareRow> run_compare(const std::vector<PipelineConfig>& configs);
std::string format_compare(const std::vector<CompareRow>& rows);

}  // namespace tvbf

#endif  // TVBF_PIPELINE_HPP
