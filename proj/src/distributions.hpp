// Copyright 2026 The mpmcp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Scalar distribution helpers shared by the probability engine and the
// testing layer. The normal CDF/quantile pair sits on the hot path of the
// lattice integrator and is kept inline.

#include <cmath>
#include <limits>

namespace mpmcp::dist {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

inline double norm_pdf(double x) { return 0.39894228040143267794 * std::exp(-0.5 * x * x); }

/// Inverse standard normal CDF, Wichura's AS241 (PPND16), relative accuracy
/// about 1e-16. Returns -inf / +inf at the end points.
double norm_quantile(double p);

/// Student t CDF with `df` degrees of freedom (df may be non-integer, > 0).
double t_cdf(double x, double df);

double t_quantile(double p, double df);

/// Quantile of the chi distribution scaled by 1/sqrt(df), i.e. of
/// sqrt(W/df) with W ~ chi-square(df). This is the mixing variable that turns
/// a multivariate normal into a multivariate t.
double scaled_chi_quantile(double p, double df);

}  // namespace mpmcp::dist
