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


#include "tvbf/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tvbf/error.hpp"
#include "tvbf/random.hpp"
#include "tvbf/tof.hpp"

namespace tvbf {

namespace {

constexpr double kWindowSigmas = 4.0;

double pulse_sigma(double fc, double bandwidth) {
  const double sigma_f = bandwidth * fc / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  return 1.0 / (2.0 * std::numbers::pi * sigma_f);
}

double max_delay(const PixelGrid& grid, const ProbeGeometry& geometry,
                 const AcquisitionParams& acq, const std::vector<Scatterer>& scatterers) {
  double worst = 0.0;
  const auto visit = [&](double x, double z) {
    if (z <= 0.0) return;
    for (double xe : {geometry.aperture_min_m(), geometry.aperture_max_m()})
      worst = std::max(worst, plane_wave_delay(x, z, xe, acq.steering_angle_rad,
                                               acq.sound_speed_m_s));
  };
  const double z = grid.axial_positions_m.back();
  visit(grid.lateral_positions_m.front(), z);
  visit(grid.lateral_positions_m.back(), z);
  for (const auto& s : scatterers) visit(s.lateral_m, s.axial_m);
  return worst;
}

}  // namespace

double tone_burst(double t, double fc, double bandwidth) {
  const double sigma = pulse_sigma(fc, bandwidth);
  return std::exp(-t * t / (2.0 * sigma * sigma)) * std::cos(2.0 * std::numbers::pi * fc * t);
}

RfFrame point_phantom(const PixelGrid& grid, const ProbeGeometry& geometry,
                      const AcquisitionParams& acq, const std::vector<Scatterer>& scatterers,
                      const PhantomOptions& options) {
  grid.validate();
  geometry.validate();
  acq.validate();
  require(options.fractional_bandwidth > 0.0 && options.noise_stddev >= 0.0,
          ErrorKind::kArgument, "phantom bandwidth must be positive and noise non-negative");
  for (const auto& s : scatterers)
    require(s.axial_m > 0.0 && std::isfinite(s.lateral_m) && std::isfinite(s.amplitude),
            ErrorKind::kArgument, "scatterer must lie at positive depth");

  const double fs = geometry.sampling_frequency_hz;
  const double fc = geometry.center_frequency_hz;
  const double window = kWindowSigmas * pulse_sigma(fc, options.fractional_bandwidth);
  std::size_t samples = options.sample_count;
  if (samples == 0) {
    const double span = max_delay(grid, geometry, acq, scatterers) + window - acq.start_time_s;
    samples = static_cast<std::size_t>(std::ceil(std::max(span, 0.0) * fs)) + 16;
  }

  RfFrame frame;
  frame.geometry = geometry;
  frame.acq = acq;
  frame.samples = Array2<float>(geometry.element_count, samples);
  std::vector<double> trace(samples);
  Rng rng(options.seed);
  for (std::size_t ch = 0; ch < geometry.element_count; ++ch) {
    std::fill(trace.begin(), trace.end(), 0.0);
    const double xe = geometry.element_x_m[ch];
    for (const auto& s : scatterers) {
      const double tau = plane_wave_delay(s.lateral_m, s.axial_m, xe, acq.steering_angle_rad,
                                          acq.sound_speed_m_s);
      const double first = std::ceil((tau - window - acq.start_time_s) * fs);
      const double last = std::floor((tau + window - acq.start_time_s) * fs);
      for (double n = std::max(first, 0.0); n <= last && n < static_cast<double>(samples); ++n) {
        const double t = acq.start_time_s + n / fs;
        trace[static_cast<std::size_t>(n)] +=
            s.amplitude * tone_burst(t - tau, fc, options.fractional_bandwidth);
      }
    }
    if (options.noise_stddev > 0.0)
      for (double& v : trace) v += rng.normal(0.0, options.noise_stddev);
    auto row = frame.samples.row(ch);
    std::transform(trace.begin(), trace.end(), row.begin(),
                   [](double v) { return static_cast<float>(v); });
  }
  return frame;
}

std::vector<Scatterer> cyst_scatterers(const PixelGrid& grid, const CystSpec& cyst,
                                       std::uint64_t seed) {
  grid.validate();
  require(cyst.radius_m > 0.0, ErrorKind::kArgument, "cyst radius must be positive");
  const double z0 = grid.axial_positions_m.front();
  const double z1 = grid.axial_positions_m.back();
  const double x0 = grid.lateral_positions_m.front();
  const double x1 = grid.lateral_positions_m.back();
  require(z1 > z0 && x1 > x0, ErrorKind::kArgument, "cyst phantom needs a 2-D grid");

  Rng rng(seed);
  std::vector<Scatterer> out;
  out.reserve(cyst.scatterer_count);
  while (out.size() < cyst.scatterer_count) {
    const double z = rng.uniform(z0, z1);
    const double x = rng.uniform(x0, x1);
    const double amplitude = rng.normal();
    const double dz = z - cyst.axial_m;
    const double dx = x - cyst.lateral_m;
    if (dz * dz + dx * dx <= cyst.radius_m * cyst.radius_m) continue;
    out.push_back(Scatterer{z, x, amplitude});
  }
  return out;
}

RfFrame cyst_phantom(const PixelGrid& grid, const ProbeGeometry& geometry,
                     const AcquisitionParams& acq, const CystSpec& cyst,
                     const PhantomOptions& options) {
  // separate streams for scatterer placement and noise
  return point_phantom(grid, geometry, acq, cyst_scatterers(grid, cyst, options.seed),
                       PhantomOptions{options.fractional_bandwidth, options.noise_stddev,
                                      options.seed + 1, options.sample_count});
}

}  // namespace tvbf
