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

#include "hfbrt/estimators.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hfbrt {

namespace {

LinearInitializer scale_pseudoinverse(const Mat& pinv, const Mat& a) {
  LinearInitializer init;
  const double trace = (pinv.array() * a.transpose().array()).sum();
  if (!(trace > 0.0)) throw NumericalError("pseudoinverse projection has zero trace");
  init.eta = static_cast<double>(a.cols()) / trace;
  init.W = init.eta * pinv;
  return init;
}

}  // namespace

LinearInitializer build_initializer(const MeasurementOperator& op) {
  return scale_pseudoinverse(op.real_pseudoinverse(), op.real_operator());
}

LinearInitializer build_initializer(const Mat& real_operator) {
  const PseudoInverse pi = pseudoinverse(real_operator);
  if (pi.rank < real_operator.rows()) {
    std::ostringstream msg;
    msg << "operator does not have full row rank (rank " << pi.rank << " < " << real_operator.rows()
        << ", condition number " << pi.condition << ")";
    throw NumericalError(msg.str());
  }
  return scale_pseudoinverse(pi.matrix, real_operator);
}

double decorrelation_trace(const LinearInitializer& init, const Mat& a) {
  if (init.W.rows() != a.cols() || init.W.cols() != a.rows()) throw ShapeError("initializer/operator mismatch");
  return static_cast<double>(a.cols()) - (init.W.array() * a.transpose().array()).sum();
}

Mat ls_estimate(const Mat& y, const LinearInitializer& init) {
  if (y.cols() != init.W.cols()) throw ShapeError("observation width does not match the initializer");
  return y * init.W.transpose();
}

Mat ls_estimate(const Observation& obs, const LinearInitializer& init) { return ls_estimate(obs.y, init); }

double nmse(const Mat& truth, const Mat& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) throw ShapeError("nmse: shape mismatch");
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw std::domain_error("nmse: reference channel has zero norm");
  return (truth - estimate).squaredNorm() / denom;
}

double nmse(const CVec& truth, const CVec& estimate) {
  if (truth.size() != estimate.size()) throw ShapeError("nmse: length mismatch");
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw std::domain_error("nmse: reference channel has zero norm");
  return (truth - estimate).squaredNorm() / denom;
}

double to_db(double linear) {
  if (linear <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(linear);
}

double mean_nmse(const std::vector<Mat>& truths, const std::vector<Mat>& estimates) {
  if (truths.size() != estimates.size() || truths.empty()) throw ShapeError("mean_nmse: batch size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) sum += nmse(truths[i], estimates[i]);
  return sum / static_cast<double>(truths.size());
}

}  // namespace hfbrt
