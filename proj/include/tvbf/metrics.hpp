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


#ifndef TVBF_METRICS_HPP
#define TVBF_METRICS_HPP

#include <span>
#include <string>
#include <vector>

#include "tvbf/core_data.hpp"

namespace tvbf {

enum class RegionKind { kCircle, kRectangle };
enum class RegionRole { kInside, kOutside };

/// A pixel region on the image plane. Circles may exclude an inner disk,
/// which gives the usual background ring around a cyst.
struct RegionSpec {
  RegionKind kind = RegionKind::kCircle;
  RegionRole role = RegionRole::kInside;
  double axial_m = 0.0;
  double lateral_m = 0.0;
  double radius_m = 0.0;
  double inner_radius_m = 0.0;
  double half_axial_m = 0.0;
  double half_lateral_m = 0.0;

  static RegionSpec circle(double axial_m, double lateral_m, double radius_m,
                           RegionRole role = RegionRole::kInside);
  static RegionSpec ring(double axial_m, double lateral_m, double inner_radius_m,
                         double outer_radius_m, RegionRole role = RegionRole::kOutside);
  static RegionSpec rectangle(double axial_m, double lateral_m, double half_axial_m,
                              double half_lateral_m, RegionRole role = RegionRole::kInside);

  bool contains(double axial_m, double lateral_m) const;
  /// Throws kArgument for bad extents or a center outside the grid.
  void validate(const PixelGrid& grid) const;
};

/// dB values of the pixels inside `region`; throws kArgument when empty.
std::vector<double> region_pixels(const BModeImage& bmode, const RegionSpec& region);

// Sample-level metrics. Inputs are dB values.

double cr(std::span<const double> inside, std::span<const double> outside);

struct CnrValue {
  double value = 0.0;
  bool capped = false;  // zero variance with unequal means
};
inline constexpr double kCnrCap = 1e6;

CnrValue cnr(std::span<const double> inside, std::span<const double> outside);
double gcnr(std::span<const double> inside, std::span<const double> outside,
            std::size_t bins = 100);

// Image-level metrics over two regions.

double cr(const BModeImage& bmode, const RegionSpec& inside, const RegionSpec& outside);
CnrValue cnr(const BModeImage& bmode, const RegionSpec& inside, const RegionSpec& outside);
double gcnr(const BModeImage& bmode, const RegionSpec& inside, const RegionSpec& outside,
            std::size_t bins = 100);

struct PsfProfile {
  std::vector<double> positions_m;
  std::vector<double> amplitude_db;  // normalized, max 0
};

/// Width between the half-amplitude (-6.02 dB) crossings around the peak,
/// each found by linear interpolation in amplitude. Throws kNumeric when a
/// side never falls to half amplitude.
double fwhm(const PsfProfile& profile);

/// Row nearest `depth_m`, renormalized to a 0 dB maximum.
PsfProfile lateral_profile(const BModeImage& bmode, double depth_m);
/// Column nearest `lateral_m`, renormalized to a 0 dB maximum.
PsfProfile axial_profile(const BModeImage& bmode, double lateral_m);

}  // namespace tvbf

#endif  // TVBF_METRICS_HPP
