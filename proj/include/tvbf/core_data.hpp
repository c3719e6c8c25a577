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


#ifndef TVBF_CORE_DATA_HPP
#define TVBF_CORE_DATA_HPP

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tvbf/array.hpp"

namespace tvbf {

/// Linear-array transducer description. Element positions are lateral
/// coordinates in meters, centered on the aperture.
struct ProbeGeometry {
  std::size_t element_count = 0;
  double pitch_m = 0.0;
  std::vector<double> element_x_m;
  double center_frequency_hz = 0.0;
  double sampling_frequency_hz = 0.0;

  /// Evenly spaced elements centered on x = 0.
  static ProbeGeometry linear(std::size_t element_count, double pitch_m,
                              double center_frequency_hz,
                              double sampling_frequency_hz);

  /// 128 elements, 0.3 mm pitch, 7.6 MHz center, 31.25 MHz sampling.
  static ProbeGeometry default_preset();

  double aperture_min_m() const { return element_x_m.front(); }
  double aperture_max_m() const { return element_x_m.back(); }

  void validate() const;
  bool operator==(const ProbeGeometry&) const = default;
};

struct AcquisitionParams {
  double steering_angle_rad = 0.0;
  double sound_speed_m_s = 1540.0;
  double start_time_s = 0.0;

  void validate() const;
  bool operator==(const AcquisitionParams&) const = default;
};

/// Raw channel data for one plane-wave transmit, stored [channel][time].
struct RfFrame {
  Array2<float> samples;
  ProbeGeometry geometry;
  AcquisitionParams acq;

  std::size_t channel_count() const { return samples.rows(); }
  std::size_t sample_count() const { return samples.cols(); }

  void validate() const;
};

struct PixelGrid {
  std::vector<double> axial_positions_m;
  std::vector<double> lateral_positions_m;

  std::size_t rows() const { return axial_positions_m.size(); }
  std::size_t cols() const { return lateral_positions_m.size(); }

  void validate() const;
  bool operator==(const PixelGrid&) const = default;
};

/// Time-of-flight corrected cube, laid out [axial][lateral][channel].
struct TofTensor {
  std::vector<double> data;
  PixelGrid grid;
  ProbeGeometry geometry;

  std::size_t rows() const { return grid.rows(); }
  std::size_t cols() const { return grid.cols(); }
  std::size_t channels() const { return geometry.element_count; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t c) const {
    return (x * cols() + y) * channels() + c;
  }
  double& at(std::size_t x, std::size_t y, std::size_t c) {
    return data[index(x, y, c)];
  }
  double at(std::size_t x, std::size_t y, std::size_t c) const {
    return data[index(x, y, c)];
  }

  /// Zero tensor shaped for grid and geometry.
  static TofTensor zeros(const PixelGrid& grid, const ProbeGeometry& geometry);

  void validate() const;
};

struct IQImage {
  Array2<std::complex<double>> pixels;
  PixelGrid grid;

  void validate() const;
};

/// Log-compressed image in dB, every pixel in [-dynamic_range_db, 0].
struct BModeImage {
  Array2<double> db;
  double dynamic_range_db = 60.0;
  PixelGrid grid;
};

/// Divides by the maximum absolute value so the tensor spans [-1, 1].
/// Zero tensors are left untouched. Returns the divisor (0 for zero input).
double normalize_unit(TofTensor& tensor);

// RFD1 container: magic, u32 version/channel_count/sample_count, six f64
// acquisition fields, channel-major little-endian f32 payload.
inline constexpr std::size_t kRfHeaderBytes = 4 + 3 * 4 + 6 * 8;

RfFrame load_rf(const std::filesystem::path& path);
void save_rf(const RfFrame& frame, const std::filesystem::path& path);

/// Uniform grid over [depth_min, depth_max] spanning the probe aperture
/// laterally. A single column sits at lateral 0.
PixelGrid default_grid(const ProbeGeometry& geometry, double depth_min_m,
                       double depth_max_m, std::size_t rows, std::size_t cols);

/// Uniform grid over explicit axial and lateral extents.
PixelGrid make_grid(double depth_min_m, double depth_max_m, std::size_t rows,
                    double lateral_min_m, double lateral_max_m,
                    std::size_t cols);

/// Named grid presets: "frame" (368 x 128 over the aperture, axial step
/// c / (2 fs) from 5 mm), "small" (128 x 64 centered sub-region) and "psf"
/// (41 x 81, 0.05 mm lateral step around 9.5 mm depth for resolution work).
PixelGrid grid_preset(const std::string& name, const ProbeGeometry& geometry,
                      const AcquisitionParams& acq);

}  // namespace tvbf

#endif  // TVBF_CORE_DATA_HPP
