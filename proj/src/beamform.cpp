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


#include "tvbf/beamform.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tvbf/error.hpp"

namespace tvbf {

namespace {

double magnitude_sq(double v) { return v * v; }
double magnitude_sq(const Complex& v) { return std::norm(v); }
double conj_of(double v) { return v; }
Complex conj_of(const Complex& v) { return std::conj(v); }

/// In-place Cholesky (R = L L^H) followed by a solve of R x = b.
template <typename T>
std::vector<T> cholesky_solve(Array2<T> r, std::span<const T> b) {
  const std::size_t n = r.rows();
  double max_pivot = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    max_pivot = std::max(max_pivot, std::abs(std::real(r(i, i))));

  for (std::size_t j = 0; j < n; ++j) {
    double diag = std::real(r(j, j));
    for (std::size_t k = 0; k < j; ++k) diag -= magnitude_sq(r(j, k));
    if (!(diag > max_pivot * 1e-14) || !std::isfinite(diag)) {
      std::ostringstream msg;
      msg << "covariance is singular or indefinite (pivot " << j << " = " << diag
          << ", condition estimate >= "
          << (diag > 0.0 ? max_pivot / diag : std::numeric_limits<double>::infinity())
          << ")";
      fail(ErrorKind::kNumeric, msg.str());
    }
    const double ljj = std::sqrt(diag);
    r(j, j) = T(ljj);
    for (std::size_t i = j + 1; i < n; ++i) {
      T s = r(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= r(i, k) * conj_of(r(j, k));
      r(i, j) = s / ljj;
    }
  }

  std::vector<T> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    T s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= r(i, k) * y[k];
    y[i] = s / std::real(r(i, i));
  }
  std::vector<T> x(n);
  for (std::size_t i = n; i-- > 0;) {
    T s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= conj_of(r(k, i)) * x[k];
    x[i] = s / std::real(r(i, i));
  }
  return x;
}

}  // namespace

IQImage das(const TofTensor& tensor,
            std::optional<std::span<const double>> apodization) {
  const std::size_t n = tensor.channels();
  std::vector<double> weights(n, 1.0 / static_cast<double>(n));
  if (apodization) {
    require(apodization->size() == n, ErrorKind::kArgument,
            "apodization length does not match channel count");
    weights.assign(apodization->begin(), apodization->end());
  }

  IQImage out;
  out.grid = tensor.grid;
  out.pixels = Array2<Complex>(tensor.rows(), tensor.cols());
  for (std::size_t x = 0; x < tensor.rows(); ++x)
    for (std::size_t y = 0; y < tensor.cols(); ++y) {
      const double* px = &tensor.data[tensor.index(x, y, 0)];
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += weights[c] * px[c];
      out.pixels(x, y) = acc;
    }
  return out;
}

MvdrParams MvdrParams::defaults(std::size_t channel_count) {
  MvdrParams p;
  p.subaperture_len = std::max<std::size_t>(1, channel_count / 2);
  p.diagonal_loading = 1.0 / (100.0 * static_cast<double>(p.subaperture_len));
  return p;
}

void MvdrParams::validate(std::size_t channel_count) const {
  require(subaperture_len >= 1 && subaperture_len <= channel_count,
          ErrorKind::kArgument, "subaperture length must lie in [1, channels]");
  require(diagonal_loading >= 0.0 && std::isfinite(diagonal_loading),
          ErrorKind::kArgument, "diagonal loading must be non-negative");
}

std::vector<Complex> mvdr_weights(const Array2<Complex>& covariance,
                                  std::span<const Complex> steering) {
  const std::size_t n = steering.size();
  require(covariance.rows() == n && covariance.cols() == n, ErrorKind::kArgument,
          "covariance and steering vector sizes disagree");
  require(std::any_of(steering.begin(), steering.end(),
                      [](const Complex& v) { return v != Complex{}; }),
          ErrorKind::kArgument, "steering vector is zero");

  auto x = cholesky_solve(covariance, steering);
  Complex denom{};
  for (std::size_t i = 0; i < n; ++i) denom += std::conj(steering[i]) * x[i];
  for (auto& v : x) v /= denom;
  return x;
}

IQImage mvdr(const TofTensor& tensor, const MvdrParams& params) {
  const std::size_t n = tensor.channels();
  params.validate(n);
  const std::size_t len = params.subaperture_len;
  const std::size_t snapshots = n - len + 1;
  const double inv_snapshots = 1.0 / static_cast<double>(snapshots);
  const std::vector<double> ones(len, 1.0);

  IQImage out;
  out.grid = tensor.grid;
  out.pixels = Array2<Complex>(tensor.rows(), tensor.cols());

  Array2<double> r(len, len);
  std::vector<double> mean(len);
  for (std::size_t x = 0; x < tensor.rows(); ++x)
    for (std::size_t y = 0; y < tensor.cols(); ++y) {
      const double* px = &tensor.data[tensor.index(x, y, 0)];
      std::fill(mean.begin(), mean.end(), 0.0);
      for (std::size_t l = 0; l < snapshots; ++l)
        for (std::size_t i = 0; i < len; ++i) mean[i] += px[l + i];
      for (double& m : mean) m *= inv_snapshots;

      double trace = 0.0;
      for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t l = 0; l < snapshots; ++l) s += px[l + i] * px[l + j];
          s *= inv_snapshots;
          r(i, j) = s;
          r(j, i) = s;
          if (i == j) trace += s;
        }
      if (trace == 0.0) continue;  // silent pixel
      const double load = params.diagonal_loading * trace / static_cast<double>(len);
      for (std::size_t i = 0; i < len; ++i) r(i, i) += load;

      const auto w = cholesky_solve<double>(r, ones);
      double denom = 0.0;
      for (double v : w) denom += v;
      double acc = 0.0;
      for (std::size_t i = 0; i < len; ++i) acc += w[i] * mean[i];
      out.pixels(x, y) = acc / denom;
    }
  return out;
}

Array2<Complex> analytic_signal(const Array2<double>& image) {
  const std::size_t m = image.rows();
  require(m >= 4, ErrorKind::kArgument, "analytic signal needs >= 4 axial samples");
  Array2<Complex> out(m, image.cols());

  // fftw_complex is layout-compatible with std::complex<double>.
  std::vector<Complex> buf(m);
  auto* raw = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan fwd = fftw_plan_dft_1d(static_cast<int>(m), raw, raw, FFTW_FORWARD,
                                   FFTW_ESTIMATE);
  fftw_plan inv = fftw_plan_dft_1d(static_cast<int>(m), raw, raw, FFTW_BACKWARD,
                                   FFTW_ESTIMATE);

  const std::size_t half = m / 2;
  for (std::size_t col = 0; col < image.cols(); ++col) {
    for (std::size_t i = 0; i < m; ++i) buf[i] = image(i, col);
    fftw_execute(fwd);
    for (std::size_t k = 1; k < m; ++k) {
      if (k < (m + 1) / 2)
        buf[k] *= 2.0;
      else if (!(m % 2 == 0 && k == half))
        buf[k] = 0.0;
    }
    fftw_execute(inv);
    for (std::size_t i = 0; i < m; ++i)
      out(i, col) = buf[i] / static_cast<double>(m);
  }
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(inv);
  return out;
}

Array2<double> hilbert_envelope(const Array2<double>& image) {
  const auto analytic = analytic_signal(image);
  Array2<double> env(image.rows(), image.cols());
  for (std::size_t i = 0; i < env.size(); ++i)
    env.data()[i] = std::abs(analytic.data()[i]);
  return env;
}

Array2<double> real_part(const IQImage& image) {
  Array2<double> out(image.pixels.rows(), image.pixels.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = image.pixels.data()[i].real();
  return out;
}

}  // namespace tvbf
