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


#ifndef TVBF_POSTPROC_HPP
#define TVBF_POSTPROC_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tvbf/array.hpp"
#include "tvbf/core_data.hpp"

namespace tvbf {

enum class ImageFormat { kPgm, kPng };

struct DisplayParams {
  double dynamic_range_db = 60.0;
  ImageFormat format = ImageFormat::kPng;

  void validate() const;
};

/// Per-pixel |I + jQ|.
Array2<double> envelope(const IQImage& iq);

/// 20 log10(env / max), clipped to [-dr_db, 0]. Throws kData when the
/// envelope has no positive maximum.
BModeImage log_compress(const Array2<double>& env, double dr_db, const PixelGrid& grid = {});

/// Linear map of [-dr, 0] dB onto gray levels 0..255.
Array2<std::uint8_t> to_gray(const BModeImage& bmode);

void write_image(const BModeImage& bmode, const DisplayParams& params,
                 const std::filesystem::path& path);

/// Binary PGM (P5, maxval 255) reader.
Array2<std::uint8_t> read_pgm(const std::filesystem::path& path);

// IQF1 dump: magic, u32 version, u32 rows, u32 cols, f64 axial min/max and
// lateral min/max, then rows * cols interleaved little-endian f32 (I, Q)
// pairs in row-major order.
void save_iq(const IQImage& iq, const std::filesystem::path& path);
IQImage load_iq(const std::filesystem::path& path);

}  // namespace tvbf

#endif  // TVBF_POSTPROC_HPP
