// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The hfbrt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <vector>

#include "hfbrt/common.hpp"
#include "hfbrt/measurement.hpp"

namespace hfbrt {

// Scaled pseudoinverse W = eta * A^+ for the real-domain operator A, with
// eta = n / tr(A^+ A) where n is the real channel dimension, so that
// tr(I - W A) = 0.
struct LinearInitializer {
  Mat W;  // (2 S S-bar) x (2 S N_p)
  double eta = 1.0;
};

LinearInitializer build_initializer(const MeasurementOperator& op);
// Same construction for an arbitrary real operator, using a dense SVD.
LinearInitializer build_initializer(const Mat& real_operator);

// tr(I - W A), evaluated without forming W A.
double decorrelation_trace(const LinearInitializer& init, const Mat& real_operator);

// h0 = W y applied to every row (subcarrier) of y.
Mat ls_estimate(const Mat& y, const LinearInitializer& init);
Mat ls_estimate(const Observation& obs, const LinearInitializer& init);

// |h - h_est|^2 / |h|^2 over all entries. Throws std::domain_error when h is zero.
double nmse(const Mat& truth, const Mat& estimate);
double nmse(const CVec& truth, const CVec& estimate);
double to_db(double linear);
// Empirical mean of per-sample NMSE.
double mean_nmse(const std::vector<Mat>& truths, const std::vector<Mat>& estimates);

}  // namespace hfbrt
