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


#include <doctest.h>

#include <cmath>
#include <numbers>

#include "test_support.hpp"
#include "tvbf/error.hpp"
#include "tvbf/phantom.hpp"
#include "tvbf/tof.hpp"

using namespace tvbf;

namespace {

RfFrame blank_frame(std::size_t channels, std::size_t samples) {
  RfFrame f;
  f.geometry = ProbeGeometry::linear(channels, 3e-4, 7.6e6, 31.25e6);
  f.samples = Array2<float>(channels, samples);
  return f;
}

}  // namespace

TEST_CASE("plane wave delay closed form") {
  CHECK(plane_wave_delay(0.0, 0.02, 0.0, 0.0, 1540.0) == doctest::Approx(2.0 * 0.02 / 1540.0));
  CHECK(plane_wave_delay(0.0, 0.02, 0.0, 0.0, 1540.0) == doctest::Approx(2.5974e-5).epsilon(1e-4));
  const double expected = (0.03 + std::sqrt(0.03 * 0.03 + 0.004 * 0.004)) / 1540.0;
  CHECK(plane_wave_delay(0.0, 0.03, 0.004, 0.0, 1540.0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(plane_wave_delay(0.001, 0.021, 0.002, 0.0, 1540.0) >
        plane_wave_delay(0.001, 0.020, 0.002, 0.0, 1540.0));
  const double steered = (0.02 * std::cos(0.1) + 0.001 * std::sin(0.1)) / 1540.0 +
                         std::hypot(0.02, 0.001 - 0.003) / 1540.0;
  CHECK(plane_wave_delay(0.001, 0.02, 0.003, 0.1, 1540.0) == doctest::Approx(steered).epsilon(1e-14));
  CHECK(test::error_kind([] { plane_wave_delay(0.0, 0.0, 0.0, 0.0, 1540.0); }) ==
        ErrorKind::kDomain);
}

TEST_CASE("delay table matches pointwise evaluation") {
  const auto geometry = ProbeGeometry::linear(2, 3e-4, 7.6e6, 31.25e6);
  AcquisitionParams acq;
  const auto tiny = build_delay_table(make_grid(0.01, 0.01, 1, 0.0, 0.0, 1), geometry, acq);
  REQUIRE(tiny.delays_s.size() == 2);
  for (std::size_t c = 0; c < 2; ++c)
    CHECK(tiny.at(0, 0, c) == plane_wave_delay(0.0, 0.01, geometry.element_x_m[c], 0.0, 1540.0));

  const auto g8 = ProbeGeometry::linear(8, 3e-4, 7.6e6, 31.25e6);
  acq.steering_angle_rad = -0.07;
  acq.sound_speed_m_s = 1480.0;
  const auto grid = make_grid(0.004, 0.012, 7, -0.003, 0.002, 5);
  const auto table = build_delay_table(grid, g8, acq);
  for (std::size_t x = 0; x < 7; ++x)
    for (std::size_t y = 0; y < 5; ++y)
      for (std::size_t c = 0; c < 8; ++c)
        CHECK(table.at(x, y, c) == plane_wave_delay(grid.lateral_positions_m[y],
                                                    grid.axial_positions_m[x], g8.element_x_m[c],
                                                    -0.07, 1480.0));
}

TEST_CASE("delay table symmetry and depth monotonicity at zero steering") {
  const auto g = ProbeGeometry::linear(16, 3e-4, 7.6e6, 31.25e6);
  const auto grid = make_grid(0.005, 0.02, 9, -0.003, 0.003, 7);
  const auto table = build_delay_table(grid, g, AcquisitionParams{});
  for (std::size_t x = 0; x < 9; ++x)
    for (std::size_t y = 0; y < 7; ++y)
      for (std::size_t c = 0; c < 16; ++c) {
        CHECK(table.at(x, y, c) == doctest::Approx(table.at(x, 6 - y, 15 - c)).epsilon(1e-13));
        CHECK(table.at(x, y, c) >= 0.0);
        if (x > 0) CHECK(table.at(x, y, c) > table.at(x - 1, y, c));
      }
}

TEST_CASE("zero frame gives a zero tensor") {
  const auto frame = blank_frame(4, 512);
  const auto grid = make_grid(0.005, 0.01, 6, -0.001, 0.001, 3);
  const auto t = tof_correct(frame, build_delay_table(grid, frame.geometry, frame.acq));
  for (double v : t.data) CHECK(v == 0.0);
}

TEST_CASE("delay on a sample knot picks that sample") {
  auto frame = blank_frame(2, 1024);
  const double fs = frame.geometry.sampling_frequency_hz;
  for (std::size_t n = 0; n < 1024; ++n) {
    frame.samples(0, n) = static_cast<float>(n);
    frame.samples(1, n) = static_cast<float>(2 * n);
  }
  // choose depth so the channel-0 delay is exactly sample 400
  DelayTable table;
  table.grid = make_grid(0.01, 0.01, 1, 0.0, 0.0, 1);
  table.channels = 2;
  table.delays_s = {400.0 / fs, 250.5 / fs};
  const auto t = tof_correct_raw(frame, table);
  CHECK(t.at(0, 0, 0) == doctest::Approx(400.0).epsilon(1e-12));
  CHECK(t.at(0, 0, 1) == doctest::Approx(501.0).epsilon(1e-12));

  table.delays_s = {-1.0 / fs, 5000.0 / fs};
  const auto outside = tof_correct_raw(frame, table);
  CHECK(outside.at(0, 0, 0) == 0.0);
  CHECK(outside.at(0, 0, 1) == 0.0);
}

TEST_CASE("correction is linear before normalization") {
  const auto geometry = ProbeGeometry::linear(6, 3e-4, 7.6e6, 31.25e6);
  const auto grid = make_grid(0.004, 0.008, 5, -0.001, 0.001, 4);
  const auto table = build_delay_table(grid, geometry, AcquisitionParams{});
  RfFrame a;
  a.geometry = geometry;
  a.samples = Array2<float>(6, 400);
  RfFrame b = a;
  RfFrame sum = a;
  Rng rng(9);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    a.samples.data()[i] = static_cast<float>(rng.uniform(-1, 1));
    b.samples.data()[i] = static_cast<float>(rng.uniform(-1, 1));
    sum.samples.data()[i] = 2.0f * a.samples.data()[i] - 0.5f * b.samples.data()[i];
  }
  const auto ta = tof_correct_raw(a, table);
  const auto tb = tof_correct_raw(b, table);
  const auto ts = tof_correct_raw(sum, table);
  for (std::size_t i = 0; i < ts.data.size(); ++i)
    CHECK(ts.data[i] == doctest::Approx(2.0 * ta.data[i] - 0.5 * tb.data[i]).epsilon(1e-6));
}

TEST_CASE("fractional delay error on a tone at fs/8") {
  auto frame = blank_frame(2, 256);
  const double fs = frame.geometry.sampling_frequency_hz;
  const double f = fs / 8.0;
  for (std::size_t n = 0; n < 256; ++n) {
    const double v = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(n) / fs);
    frame.samples(0, n) = static_cast<float>(v);
    frame.samples(1, n) = static_cast<float>(v);
  }
  DelayTable table;
  table.grid = make_grid(0.01, 0.01, 1, 0.0, 0.0, 1);
  table.channels = 2;
  double worst = 0.0;
  for (double frac = 0.0; frac < 1.0; frac += 0.05) {
    const double t = (100.0 + frac) / fs;
    table.delays_s = {t, t};
    const double got = tof_correct_raw(frame, table).at(0, 0, 0);
    worst = std::max(worst, std::abs(got - std::sin(2.0 * std::numbers::pi * f * t)));
  }
  // chord midpoint of a tone at 8 samples per cycle: sin(a + pi/8) cos(pi/8)
  CHECK(worst <= 1.0 - std::cos(std::numbers::pi / 8.0) + 1e-6);
}

TEST_CASE("point echo aligns across channels at the scatterer") {
  const auto geometry = ProbeGeometry::default_preset();
  const AcquisitionParams acq;
  const auto grid = grid_preset("psf", geometry, acq);
  const Scatterer target{9.5e-3, 0.4e-3, 1.0};
  const auto frame = point_phantom(grid, geometry, acq, {target});
  const auto t = tof_correct(frame, build_delay_table(grid, geometry, acq));

  // coherence |sum|^2 / (N sum |.|^2) peaks where the echoes line up
  double best = -1.0;
  std::size_t bx = 0;
  std::size_t by = 0;
  for (std::size_t x = 0; x < t.rows(); ++x)
    for (std::size_t y = 0; y < t.cols(); ++y) {
      double s = 0.0;
      double e = 0.0;
      for (std::size_t c = 0; c < t.channels(); ++c) {
        s += t.at(x, y, c);
        e += t.at(x, y, c) * t.at(x, y, c);
      }
      if (e < 1e-6) continue;
      const double coherence = s * s / (static_cast<double>(t.channels()) * e);
      if (coherence > best) {
        best = coherence;
        bx = x;
        by = y;
      }
    }
  const double dz = grid.axial_positions_m[1] - grid.axial_positions_m[0];
  const double dx = grid.lateral_positions_m[1] - grid.lateral_positions_m[0];
  CHECK(std::abs(grid.axial_positions_m[bx] - target.axial_m) <= dz);
  CHECK(std::abs(grid.lateral_positions_m[by] - target.lateral_m) <= dx);
}
