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


#ifndef TVBF_PHANTOM_HPP
#define TVBF_PHANTOM_HPP

#include <cstdint>
#include <vector>

#include "tvbf/core_data.hpp"

namespace tvbf {

struct Scatterer {
  double axial_m = 0.0;
  double lateral_m = 0.0;
  double amplitude = 1.0;
};

struct PhantomOptions {
  double fractional_bandwidth = 0.6;  // -6 dB, relative to the center frequency
  double noise_stddev = 0.0;          // additive white noise
  std::uint64_t seed = 0;
  std::size_t sample_count = 0;       // 0 picks a record covering the grid
};

/// Gaussian-windowed tone burst at time t (seconds) around its peak.
double tone_burst(double t_s, double center_frequency_hz, double fractional_bandwidth);

/// RF frame holding one delayed tone burst per scatterer and channel, at the
/// two-way plane-wave time of flight.
RfFrame point_phantom(const PixelGrid& grid, const ProbeGeometry& geometry,
                      const AcquisitionParams& acq, const std::vector<Scatterer>& scatterers,
                      const PhantomOptions& options = {});

struct CystSpec {
  double axial_m = 0.0;
  double lateral_m = 0.0;
  double radius_m = 0.0;
  std::size_t scatterer_count = 4000;  // speckle scatterers over the grid
};

/// Random speckle scatterers over the grid with none inside the cyst disk.
std::vector<Scatterer> cyst_scatterers(const PixelGrid& grid, const CystSpec& cyst,
                                       std::uint64_t seed);

RfFrame cyst_phantom(const PixelGrid& grid, const ProbeGeometry& geometry,
                     const AcquisitionParams& acq, const CystSpec& cyst,
                     const PhantomOptions& options = {});

}  // namespace tvbf

#endif  // TVBF_PHANTOM_HPP
