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


#ifndef TVBF_TOF_HPP
#define TVBF_TOF_HPP

#include <vector>

#include "tvbf/core_data.hpp"

namespace tvbf {

/// Two-way delays [axial][lateral][channel] in seconds.
struct DelayTable {
  std::vector<double> delays_s;
  PixelGrid grid;
  std::size_t channels = 0;

  double at(std::size_t x, std::size_t y, std::size_t c) const {
    return delays_s[(x * grid.cols() + y) * channels + c];
  }
};

/// Plane-wave transmit plus element receive path:
/// (z cos a + x sin a) / c + sqrt(z^2 + (x - xe)^2) / c.
double plane_wave_delay(double x_m, double z_m, double element_x_m,
                        double angle_rad, double c_m_s);

DelayTable build_delay_table(const PixelGrid& grid,
                             const ProbeGeometry& geometry,
                             const AcquisitionParams& acq);

/// Aligns channel samples onto the grid with linear interpolation; samples
/// outside the record read as zero. No normalization.
TofTensor tof_correct_raw(const RfFrame& frame, const DelayTable& table);

/// tof_correct_raw followed by per-frame normalization to [-1, 1].
TofTensor tof_correct(const RfFrame& frame, const DelayTable& table);

}  // namespace tvbf

#endif  // TVBF_TOF_HPP
