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


#ifndef TVBF_BEAMFORM_HPP
#define TVBF_BEAMFORM_HPP

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "tvbf/array.hpp"
#include "tvbf/core_data.hpp"

namespace tvbf {

using Complex = std::complex<double>;

/// Delay-and-sum over the channel axis. Without weights every channel gets
/// 1/N. The result is real; quadrature comes from `analytic_signal`.
IQImage das(const TofTensor& tensor,
            std::optional<std::span<const double>> apodization = std::nullopt);

struct MvdrParams {
  std::size_t subaperture_len = 0;  // L
  double diagonal_loading = 0.0;    // fraction of trace(R)/L added to the diagonal

  /// L = N/2, loading = 1/(100 L).
  static MvdrParams defaults(std::size_t channel_count);
  void validate(std::size_t channel_count) const;
};

/// w = R^-1 a / (a^H R^-1 a). Throws kNumeric when R is not positive
/// definite, with a condition-number estimate in the message.
std::vector<Complex> mvdr_weights(const Array2<Complex>& covariance,
                                  std::span<const Complex> steering);

/// Spatially smoothed MVDR with an all-ones steering vector on pre-delayed
/// data. Output is real like `das`.
IQImage mvdr(const TofTensor& tensor, const MvdrParams& params);

/// Per-column analytic signal along the axial axis (one-sided spectrum).
Array2<Complex> analytic_signal(const Array2<double>& image);

/// Magnitude of `analytic_signal`. Columns need at least 4 samples.
Array2<double> hilbert_envelope(const Array2<double>& image);

/// Real part of an IQ image as a plain array.
Array2<double> real_part(const IQImage& image);

}  // namespace tvbf

#endif  // TVBF_BEAMFORM_HPP
