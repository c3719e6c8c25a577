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


#include "tvbf/tof.hpp"

#include <cmath>

#include "tvbf/error.hpp"

namespace tvbf {

double plane_wave_delay(double x_m, double z_m, double element_x_m,
                        double angle_rad, double c_m_s) {
  require(z_m > 0.0, ErrorKind::kDomain, "pixel depth must be positive");
  require(c_m_s > 0.0, ErrorKind::kDomain, "sound speed must be positive");
  const double tx = (z_m * std::cos(angle_rad) + x_m * std::sin(angle_rad)) / c_m_s;
  const double rx = std::hypot(z_m, x_m - element_x_m) / c_m_s;
  return tx + rx;
}

DelayTable build_delay_table(const PixelGrid& grid,
                             const ProbeGeometry& geometry,
                             const AcquisitionParams& acq) {
  grid.validate();
  geometry.validate();
  acq.validate();

  DelayTable table;
  table.grid = grid;
  table.channels = geometry.element_count;
  table.delays_s.resize(grid.rows() * grid.cols() * table.channels);
  std::size_t i = 0;
  for (double z : grid.axial_positions_m)
    for (double x : grid.lateral_positions_m)
      for (double xe : geometry.element_x_m)
        table.delays_s[i++] = plane_wave_delay(x, z, xe, acq.steering_angle_rad,
                                               acq.sound_speed_m_s);
  return table;
}

TofTensor tof_correct_raw(const RfFrame& frame, const DelayTable& table) {
  require(frame.channel_count() == table.channels, ErrorKind::kArgument,
          "delay table channel count does not match frame");
  const double fs = frame.geometry.sampling_frequency_hz;
  const double t0 = frame.acq.start_time_s;
  const std::size_t n = frame.sample_count();

  TofTensor out = TofTensor::zeros(table.grid, frame.geometry);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const std::size_t c = i % table.channels;
    const double pos = (table.delays_s[i] - t0) * fs;
    if (!(pos >= 0.0) || pos > static_cast<double>(n - 1)) continue;
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    const auto ch = frame.samples.row(c);
    const double lo = ch[k];
    const double hi = k + 1 < n ? static_cast<double>(ch[k + 1]) : 0.0;
    out.data[i] = frac == 0.0 ? lo : lo + frac * (hi - lo);
  }
  return out;
}

TofTensor tof_correct(const RfFrame& frame, const DelayTable& table) {
  TofTensor t = tof_correct_raw(frame, table);
  normalize_unit(t);
  return t;
}

}  // namespace tvbf
