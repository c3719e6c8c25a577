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


#include "tvbf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "tvbf/error.hpp"

namespace tvbf {

namespace {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // population
};

Moments moments(std::span<const double> v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= static_cast<double>(v.size());
  return m;
}

void require_samples(std::span<const double> v, std::size_t n, const char* what) {
  require(v.size() >= n, ErrorKind::kArgument, what);
  for (double x : v) require(std::isfinite(x), ErrorKind::kData, "metric input is not finite");
}

std::size_t nearest(const std::vector<double>& axis, double x) {
  require(!axis.empty(), ErrorKind::kArgument, "empty grid axis");
  const double step = axis.size() > 1 ? (axis.back() - axis.front()) / (axis.size() - 1) : 0.0;
  require(x >= axis.front() - step / 2 && x <= axis.back() + step / 2, ErrorKind::kArgument,
          "profile position lies outside the grid");
  const auto it = std::min_element(axis.begin(), axis.end(), [x](double a, double b) {
    return std::abs(a - x) < std::abs(b - x);
  });
  return static_cast<std::size_t>(it - axis.begin());
}

PsfProfile normalized(std::vector<double> positions, std::vector<double> db) {
  const double peak = *std::max_element(db.begin(), db.end());
  for (double& v : db) v -= peak;
  return PsfProfile{std::move(positions), std::move(db)};
}

// Position where amplitude crosses `half` between samples i and j.
double crossing(const PsfProfile& p, const std::vector<double>& amp, std::size_t i,
                std::size_t j, double half) {
  const double t = (amp[i] - half) / (amp[i] - amp[j]);
  return p.positions_m[i] + t * (p.positions_m[j] - p.positions_m[i]);
}

}  // namespace

RegionSpec RegionSpec::circle(double axial_m, double lateral_m, double radius_m,
                              RegionRole role) {
  RegionSpec r;
  r.kind = RegionKind::kCircle;
  r.role = role;
  r.axial_m = axial_m;
  r.lateral_m = lateral_m;
  r.radius_m = radius_m;
  return r;
}

RegionSpec RegionSpec::ring(double axial_m, double lateral_m, double inner_radius_m,
                            double outer_radius_m, RegionRole role) {
  RegionSpec r = circle(axial_m, lateral_m, outer_radius_m, role);
  r.inner_radius_m = inner_radius_m;
  return r;
}

RegionSpec RegionSpec::rectangle(double axial_m, double lateral_m, double half_axial_m,
                                 double half_lateral_m, RegionRole role) {
  RegionSpec r;
  r.kind = RegionKind::kRectangle;
  r.role = role;
  r.axial_m = axial_m;
  r.lateral_m = lateral_m;
  r.half_axial_m = half_axial_m;
  r.half_lateral_m = half_lateral_m;
  return r;
}

bool RegionSpec::contains(double z, double x) const {
  const double dz = z - axial_m;
  const double dx = x - lateral_m;
  if (kind == RegionKind::kRectangle)
    return std::abs(dz) <= half_axial_m && std::abs(dx) <= half_lateral_m;
  const double r2 = dz * dz + dx * dx;
  return r2 <= radius_m * radius_m && r2 >= inner_radius_m * inner_radius_m;
}

void RegionSpec::validate(const PixelGrid& grid) const {
  if (kind == RegionKind::kCircle)
    require(radius_m > 0.0 && inner_radius_m >= 0.0 && inner_radius_m < radius_m,
            ErrorKind::kArgument, "circle region needs 0 <= inner radius < radius");
  else
    require(half_axial_m > 0.0 && half_lateral_m > 0.0, ErrorKind::kArgument,
            "rectangle region needs positive half extents");
  require(!grid.axial_positions_m.empty() && !grid.lateral_positions_m.empty(),
          ErrorKind::kArgument, "region needs a non-empty grid");
  require(axial_m >= grid.axial_positions_m.front() && axial_m <= grid.axial_positions_m.back() &&
              lateral_m >= grid.lateral_positions_m.front() &&
              lateral_m <= grid.lateral_positions_m.back(),
          ErrorKind::kArgument, "region center lies outside the grid");
}

std::vector<double> region_pixels(const BModeImage& bmode, const RegionSpec& region) {
  region.validate(bmode.grid);
  require(bmode.grid.rows() == bmode.db.rows() && bmode.grid.cols() == bmode.db.cols(),
          ErrorKind::kArgument, "image and grid shapes disagree");
  std::vector<double> out;
  for (std::size_t r = 0; r < bmode.db.rows(); ++r)
    for (std::size_t c = 0; c < bmode.db.cols(); ++c)
      if (region.contains(bmode.grid.axial_positions_m[r], bmode.grid.lateral_positions_m[c]))
        out.push_back(bmode.db(r, c));
  require(!out.empty(), ErrorKind::kArgument, "region contains no pixels");
  return out;
}

double cr(std::span<const double> inside, std::span<const double> outside) {
  require_samples(inside, 1, "CR needs a non-empty inside region");
  require_samples(outside, 1, "CR needs a non-empty outside region");
  return std::abs(moments(inside).mean - moments(outside).mean);
}

CnrValue cnr(std::span<const double> inside, std::span<const double> outside) {
  require_samples(inside, 2, "CNR needs at least 2 inside pixels");
  require_samples(outside, 2, "CNR needs at least 2 outside pixels");
  const auto a = moments(inside);
  const auto b = moments(outside);
  const double diff = std::abs(a.mean - b.mean);
  const double spread = std::sqrt(a.variance + b.variance);
  if (spread == 0.0) return diff == 0.0 ? CnrValue{0.0, false} : CnrValue{kCnrCap, true};
  const double value = diff / spread;
  return value > kCnrCap ? CnrValue{kCnrCap, true} : CnrValue{value, false};
}

double gcnr(std::span<const double> inside, std::span<const double> outside, std::size_t bins) {
  require_samples(inside, 1, "GCNR needs a non-empty inside region");
  require_samples(outside, 1, "GCNR needs a non-empty outside region");
  require(bins >= 2, ErrorKind::kArgument, "GCNR needs at least 2 bins");
  const auto [in_lo, in_hi] = std::minmax_element(inside.begin(), inside.end());
  const auto [out_lo, out_hi] = std::minmax_element(outside.begin(), outside.end());
  const double lo = std::min(*in_lo, *out_lo);
  const double hi = std::max(*in_hi, *out_hi);
  if (hi == lo) return 0.0;

  const auto histogram = [&](std::span<const double> v) {
    std::vector<std::uint64_t> h(bins, 0);
    for (double x : v) {
      auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
      ++h[std::min(b, bins - 1)];
    }
    return h;
  };
  // overlap of the normalized histograms, in integers so full overlap is exact
  const auto hin = histogram(inside);
  const auto hout = histogram(outside);
  const std::uint64_t nin = inside.size();
  const std::uint64_t nout = outside.size();
  std::uint64_t shared = 0;
  for (std::size_t b = 0; b < bins; ++b) shared += std::min(hin[b] * nout, hout[b] * nin);
  const double overlap = static_cast<double>(shared) / static_cast<double>(nin * nout);
  return std::clamp(1.0 - overlap, 0.0, 1.0);
}

double cr(const BModeImage& bmode, const RegionSpec& inside, const RegionSpec& outside) {
  return cr(region_pixels(bmode, inside), region_pixels(bmode, outside));
}

CnrValue cnr(const BModeImage& bmode, const RegionSpec& inside, const RegionSpec& outside) {
  return cnr(region_pixels(bmode, inside), region_pixels(bmode, outside));
}

double gcnr(const BModeImage& bmode, const RegionSpec& inside, const RegionSpec& outside,
            std::size_t bins) {
  return gcnr(region_pixels(bmode, inside), region_pixels(bmode, outside), bins);
}

double fwhm(const PsfProfile& profile) {
  const auto& db = profile.amplitude_db;
  require(db.size() == profile.positions_m.size() && db.size() >= 3, ErrorKind::kArgument,
          "profile needs at least 3 samples with matching positions");
  std::vector<double> amp(db.size());
  std::transform(db.begin(), db.end(), amp.begin(),
                 [](double v) { return std::pow(10.0, v / 20.0); });
  const auto peak = static_cast<std::size_t>(std::max_element(amp.begin(), amp.end()) - amp.begin());
  const double half = 0.5 * amp[peak];

  std::size_t left = peak;
  while (left > 0 && amp[left] > half) --left;
  require(amp[left] <= half, ErrorKind::kNumeric,
          "resolution undefined: profile never reaches half amplitude on the left");
  std::size_t right = peak;
  while (right + 1 < amp.size() && amp[right] > half) ++right;
  require(amp[right] <= half, ErrorKind::kNumeric,
          "resolution undefined: profile never reaches half amplitude on the right");

  const double x_left = crossing(profile, amp, left + 1, left, half);
  const double x_right = crossing(profile, amp, right - 1, right, half);
  return std::abs(x_right - x_left);
}

PsfProfile lateral_profile(const BModeImage& bmode, double depth_m) {
  const std::size_t r = nearest(bmode.grid.axial_positions_m, depth_m);
  const auto row = bmode.db.row(r);
  return normalized(bmode.grid.lateral_positions_m, {row.begin(), row.end()});
}

PsfProfile axial_profile(const BModeImage& bmode, double lateral_m) {
  const std::size_t c = nearest(bmode.grid.lateral_positions_m, lateral_m);
  std::vector<double> column(bmode.db.rows());
  for (std::size_t r = 0; r < column.size(); ++r) column[r] = bmode.db(r, c);
  return normalized(bmode.grid.axial_positions_m, std::move(column));
}

}  // namespace tvbf
