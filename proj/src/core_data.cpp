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


#include "tvbf/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tvbf/binary_io.hpp"
#include "tvbf/error.hpp"

namespace tvbf {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kCorruption: return "corruption";
    case ErrorKind::kData: return "data";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kSchedule: return "schedule";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat:
    case ErrorKind::kCorruption:
    case ErrorKind::kData:
    case ErrorKind::kIo:
      return 2;
    case ErrorKind::kDomain:
    case ErrorKind::kNumeric:
    case ErrorKind::kSchedule:
      return 3;
    case ErrorKind::kArgument:
    case ErrorKind::kConfig:
      return 4;
  }
  return 1;
}

namespace {

constexpr char kRfMagic[] = "RFD1";
constexpr std::uint32_t kRfVersion = 1;

void require_increasing(const std::vector<double>& v, const char* what) {
  require(!v.empty(), ErrorKind::kArgument, std::string(what) + " is empty");
  for (std::size_t i = 1; i < v.size(); ++i)
    require(v[i] > v[i - 1], ErrorKind::kArgument,
            std::string(what) + " must be strictly increasing");
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

}  // namespace

ProbeGeometry ProbeGeometry::linear(std::size_t element_count, double pitch_m,
                                    double center_frequency_hz,
                                    double sampling_frequency_hz) {
  ProbeGeometry g;
  g.element_count = element_count;
  g.pitch_m = pitch_m;
  g.center_frequency_hz = center_frequency_hz;
  g.sampling_frequency_hz = sampling_frequency_hz;
  g.element_x_m.resize(element_count);
  const double center = 0.5 * static_cast<double>(element_count - 1);
  for (std::size_t i = 0; i < element_count; ++i)
    g.element_x_m[i] = (static_cast<double>(i) - center) * pitch_m;
  return g;
}

ProbeGeometry ProbeGeometry::default_preset() {
  return linear(128, 0.3e-3, 7.6e6, 31.25e6);
}

void ProbeGeometry::validate() const {
  require(element_count >= 2, ErrorKind::kArgument,
          "probe needs at least two elements");
  require(element_x_m.size() == element_count, ErrorKind::kArgument,
          "element position count does not match element_count");
  require(pitch_m > 0.0 && std::isfinite(pitch_m), ErrorKind::kArgument,
          "pitch must be positive");
  require(center_frequency_hz > 0.0 && sampling_frequency_hz > 0.0,
          ErrorKind::kArgument, "frequencies must be positive");
  for (std::size_t i = 1; i < element_count; ++i) {
    const double gap = element_x_m[i] - element_x_m[i - 1];
    require(gap > 0.0, ErrorKind::kArgument,
            "element positions must be strictly increasing");
    require(std::abs(gap - pitch_m) <= 1e-12, ErrorKind::kArgument,
            "element spacing does not match pitch");
  }
}

void AcquisitionParams::validate() const {
  require(sound_speed_m_s >= 1000.0 && sound_speed_m_s <= 2000.0,
          ErrorKind::kArgument, "sound speed outside [1000, 2000] m/s");
  require(std::abs(steering_angle_rad) < std::numbers::pi / 4.0,
          ErrorKind::kArgument, "steering angle must be below pi/4");
  require(std::isfinite(start_time_s), ErrorKind::kArgument,
          "start time must be finite");
}

void RfFrame::validate() const {
  geometry.validate();
  acq.validate();
  require(channel_count() == geometry.element_count, ErrorKind::kArgument,
          "channel count does not match probe element count");
  require(sample_count() >= 1, ErrorKind::kArgument, "frame has no samples");
  for (float s : samples.data())
    require(std::isfinite(s), ErrorKind::kData, "non-finite RF sample");
}

void PixelGrid::validate() const {
  require_increasing(axial_positions_m, "axial positions");
  require_increasing(lateral_positions_m, "lateral positions");
}

TofTensor TofTensor::zeros(const PixelGrid& grid, const ProbeGeometry& geometry) {
  TofTensor t;
  t.grid = grid;
  t.geometry = geometry;
  t.data.assign(grid.rows() * grid.cols() * geometry.element_count, 0.0);
  return t;
}

void TofTensor::validate() const {
  grid.validate();
  require(data.size() == rows() * cols() * channels(), ErrorKind::kArgument,
          "ToF tensor shape does not match grid and geometry");
  for (double v : data)
    require(std::isfinite(v), ErrorKind::kData, "non-finite ToF value");
}

void IQImage::validate() const {
  grid.validate();
  require(pixels.rows() == grid.rows() && pixels.cols() == grid.cols(),
          ErrorKind::kArgument, "IQ image shape does not match grid");
  for (const auto& p : pixels.data())
    require(std::isfinite(p.real()) && std::isfinite(p.imag()),
            ErrorKind::kData, "non-finite IQ pixel");
}

double normalize_unit(TofTensor& tensor) {
  double peak = 0.0;
  for (double v : tensor.data) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return 0.0;
  for (double& v : tensor.data) v /= peak;
  return peak;
}

RfFrame load_rf(const std::filesystem::path& path) {
  auto in = io::Reader::from_file(path);
  require(in.has_magic(kRfMagic), ErrorKind::kFormat,
          "not an RFD1 file: " + path.string());
  in.skip(4);
  const auto version = in.u32();
  require(version == kRfVersion, ErrorKind::kFormat,
          "unsupported RFD1 version " + std::to_string(version));
  const auto channels = in.u32();
  const auto samples = in.u32();

  RfFrame frame;
  const double fc = in.f64();
  const double fs = in.f64();
  const double pitch = in.f64();
  frame.acq.steering_angle_rad = in.f64();
  frame.acq.sound_speed_m_s = in.f64();
  frame.acq.start_time_s = in.f64();

  const std::size_t expected =
      static_cast<std::size_t>(channels) * samples * sizeof(float);
  require(in.remaining() == expected, ErrorKind::kCorruption,
          "RFD1 payload size does not match header");
  require(channels >= 2 && samples >= 1, ErrorKind::kCorruption,
          "RFD1 header has empty dimensions");

  frame.geometry = ProbeGeometry::linear(channels, pitch, fc, fs);
  frame.samples = Array2<float>(channels, samples);
  for (float& s : frame.samples.data()) s = in.f32();
  frame.validate();
  return frame;
}

void save_rf(const RfFrame& frame, const std::filesystem::path& path) {
  require(frame.channel_count() > 0, ErrorKind::kArgument,
          "refusing to write a zero-channel frame");
  require(frame.sample_count() > 0, ErrorKind::kArgument,
          "refusing to write a zero-sample frame");
  require(frame.channel_count() == frame.geometry.element_count,
          ErrorKind::kArgument, "channel count does not match geometry");
  for (float s : frame.samples.data())
    require(std::isfinite(s), ErrorKind::kData, "non-finite RF sample");

  io::Writer out;
  out.magic(kRfMagic);
  out.u32(kRfVersion);
  out.u32(static_cast<std::uint32_t>(frame.channel_count()));
  out.u32(static_cast<std::uint32_t>(frame.sample_count()));
  out.f64(frame.geometry.center_frequency_hz);
  out.f64(frame.geometry.sampling_frequency_hz);
  out.f64(frame.geometry.pitch_m);
  out.f64(frame.acq.steering_angle_rad);
  out.f64(frame.acq.sound_speed_m_s);
  out.f64(frame.acq.start_time_s);
  for (float s : frame.samples.data()) out.f32(s);
  out.write_file(path);
}

PixelGrid default_grid(const ProbeGeometry& geometry, double depth_min_m,
                       double depth_max_m, std::size_t rows, std::size_t cols) {
  require(rows >= 1 && cols >= 1, ErrorKind::kArgument,
          "grid dimensions must be positive");
  require(depth_min_m < depth_max_m, ErrorKind::kArgument,
          "depth_min must be below depth_max");
  PixelGrid g;
  if (rows == 1)
    g.axial_positions_m = {0.5 * (depth_min_m + depth_max_m)};
  else
    g.axial_positions_m = linspace(depth_min_m, depth_max_m, rows);
  if (cols == 1)
    g.lateral_positions_m = {0.0};
  else
    g.lateral_positions_m =
        linspace(geometry.aperture_min_m(), geometry.aperture_max_m(), cols);
  return g;
}

PixelGrid make_grid(double depth_min_m, double depth_max_m, std::size_t rows,
                    double lateral_min_m, double lateral_max_m,
                    std::size_t cols) {
  require(rows >= 1 && cols >= 1, ErrorKind::kArgument,
          "grid dimensions must be positive");
  require(depth_min_m <= depth_max_m && lateral_min_m <= lateral_max_m,
          ErrorKind::kArgument, "grid extents are inverted");
  PixelGrid g;
  g.axial_positions_m = linspace(depth_min_m, depth_max_m, rows);
  g.lateral_positions_m = linspace(lateral_min_m, lateral_max_m, cols);
  g.validate();
  return g;
}

PixelGrid grid_preset(const std::string& name, const ProbeGeometry& geometry,
                      const AcquisitionParams& acq) {
  const double dz = acq.sound_speed_m_s / (2.0 * geometry.sampling_frequency_hz);
  if (name == "frame") {
    constexpr std::size_t kRows = 368;
    const double z0 = 5e-3;
    return default_grid(geometry, z0, z0 + dz * (kRows - 1), kRows, 128);
  }
  if (name == "small") {
    constexpr std::size_t kRows = 128;
    constexpr std::size_t kCols = 64;
    const double z0 = 8e-3;
    const double half = 0.5 * geometry.pitch_m * (kCols - 1);
    return make_grid(z0, z0 + dz * (kRows - 1), kRows, -half, half, kCols);
  }
  if (name == "psf") {
    constexpr std::size_t kRows = 41;
    constexpr std::size_t kCols = 81;
    const double z0 = 9e-3;
    return make_grid(z0, z0 + dz * (kRows - 1), kRows, -2e-3, 2e-3, kCols);
  }
  fail(ErrorKind::kConfig, "unknown grid preset: " + name);
}

}  // namespace tvbf
