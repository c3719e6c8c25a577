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


#include "tvbf/postproc.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "tvbf/binary_io.hpp"
#include "tvbf/error.hpp"

namespace tvbf {

namespace {

constexpr char kIqMagic[] = "IQF1";
constexpr std::uint32_t kIqVersion = 1;

void write_pgm(const Array2<std::uint8_t>& gray, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open for writing: " + path.string());
  out << "P5\n" << gray.cols() << ' ' << gray.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data().data()),
            static_cast<std::streamsize>(gray.size()));
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

void write_png(const Array2<std::uint8_t>& gray, const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "wb"),
                                                       &std::fclose);
  if (!file) fail(ErrorKind::kIo, "cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "PNG encoding failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(gray.cols()),
               static_cast<png_uint_32>(gray.rows()), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < gray.rows(); ++r)
    png_write_row(png, const_cast<png_bytep>(gray.row(r).data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

double grid_min(const std::vector<double>& v) { return v.empty() ? 0.0 : v.front(); }
double grid_max(const std::vector<double>& v) { return v.empty() ? 0.0 : v.back(); }

}  // namespace

void DisplayParams::validate() const {
  require(std::isfinite(dynamic_range_db) && dynamic_range_db > 0.0, ErrorKind::kConfig,
          "dynamic range must be positive");
}

Array2<double> envelope(const IQImage& iq) {
  Array2<double> env(iq.pixels.rows(), iq.pixels.cols());
  for (std::size_t i = 0; i < env.size(); ++i) env.data()[i] = std::abs(iq.pixels.data()[i]);
  return env;
}

BModeImage log_compress(const Array2<double>& env, double dr_db, const PixelGrid& grid) {
  require(std::isfinite(dr_db) && dr_db > 0.0, ErrorKind::kArgument,
          "dynamic range must be positive");
  double peak = 0.0;
  for (double v : env.data()) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::kData,
            "envelope values must be finite and non-negative");
    peak = std::max(peak, v);
  }
  require(peak > 0.0, ErrorKind::kData, "cannot log-compress an all-zero envelope");

  BModeImage out;
  out.dynamic_range_db = dr_db;
  out.grid = grid;
  out.db = Array2<double>(env.rows(), env.cols());
  for (std::size_t i = 0; i < env.size(); ++i) {
    const double v = env.data()[i];
    const double db = v > 0.0 ? 20.0 * std::log10(v / peak) : -dr_db;
    out.db.data()[i] = std::clamp(db, -dr_db, 0.0);
  }
  return out;
}

Array2<std::uint8_t> to_gray(const BModeImage& bmode) {
  const double dr = bmode.dynamic_range_db;
  Array2<std::uint8_t> gray(bmode.db.rows(), bmode.db.cols());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const double level = (std::clamp(bmode.db.data()[i], -dr, 0.0) + dr) / dr * 255.0;
    gray.data()[i] = static_cast<std::uint8_t>(std::lround(level));
  }
  return gray;
}

void write_image(const BModeImage& bmode, const DisplayParams& params,
                 const std::filesystem::path& path) {
  params.validate();
  require(!bmode.db.empty(), ErrorKind::kArgument, "cannot write an empty image");
  BModeImage shown = bmode;
  shown.dynamic_range_db = params.dynamic_range_db;
  const auto gray = to_gray(shown);
  if (params.format == ImageFormat::kPgm)
    write_pgm(gray, path);
  else
    write_png(gray, path);
}

Array2<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open: " + path.string());
  std::string magic;
  std::size_t cols = 0;
  std::size_t rows = 0;
  int maxval = 0;
  in >> magic >> cols >> rows >> maxval;
  require(in && magic == "P5" && maxval == 255, ErrorKind::kFormat,
          "not an 8-bit binary PGM: " + path.string());
  in.get();
  Array2<std::uint8_t> gray(rows, cols);
  in.read(reinterpret_cast<char*>(gray.data().data()), static_cast<std::streamsize>(gray.size()));
  require(static_cast<std::size_t>(in.gcount()) == gray.size(), ErrorKind::kCorruption,
          "PGM payload truncated");
  return gray;
}

void save_iq(const IQImage& iq, const std::filesystem::path& path) {
  io::Writer out;
  out.magic(kIqMagic);
  out.u32(kIqVersion);
  out.u32(static_cast<std::uint32_t>(iq.pixels.rows()));
  out.u32(static_cast<std::uint32_t>(iq.pixels.cols()));
  out.f64(grid_min(iq.grid.axial_positions_m));
  out.f64(grid_max(iq.grid.axial_positions_m));
  out.f64(grid_min(iq.grid.lateral_positions_m));
  out.f64(grid_max(iq.grid.lateral_positions_m));
  for (const auto& p : iq.pixels.data()) {
    out.f32(static_cast<float>(p.real()));
    out.f32(static_cast<float>(p.imag()));
  }
  out.write_file(path);
}

IQImage load_iq(const std::filesystem::path& path) {
  auto in = io::Reader::from_file(path);
  require(in.has_magic(kIqMagic), ErrorKind::kFormat, "not an IQF1 file: " + path.string());
  in.skip(4);
  const auto version = in.u32();
  require(version == kIqVersion, ErrorKind::kFormat,
          "unsupported IQF1 version " + std::to_string(version));
  const std::size_t rows = in.u32();
  const std::size_t cols = in.u32();
  const double axial_min = in.f64();
  const double axial_max = in.f64();
  const double lateral_min = in.f64();
  const double lateral_max = in.f64();
  require(rows >= 1 && cols >= 1, ErrorKind::kCorruption, "IQF1 header has empty dimensions");
  require(std::isfinite(axial_min) && std::isfinite(axial_max) && std::isfinite(lateral_min) &&
              std::isfinite(lateral_max) && axial_min <= axial_max && lateral_min <= lateral_max,
          ErrorKind::kCorruption, "IQF1 grid extents are invalid");
  require(in.remaining() == rows * cols * 2 * sizeof(float), ErrorKind::kCorruption,
          "IQF1 payload size does not match header");

  IQImage iq;
  iq.grid = make_grid(axial_min, axial_max, rows, lateral_min, lateral_max, cols);
  iq.pixels = Array2<std::complex<double>>(rows, cols);
  for (auto& p : iq.pixels.data()) {
    const float re = in.f32();
    const float im = in.f32();
    require(std::isfinite(re) && std::isfinite(im), ErrorKind::kData,
            "IQF1 payload holds non-finite values");
    p = {re, im};
  }
  return iq;
}

}  // namespace tvbf
