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

#include <functional>
#include <vector>

#include "hfbrt/tensor.hpp"

namespace testutil {

using hfbrt::Mat;
using hfbrt::ad::Graph;
using hfbrt::ad::Var;

inline Mat random_mat(Eigen::Index r, Eigen::Index c, hfbrt::Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = g(rng);
  return m;
}

// Builds a scalar from variable leaves.
using ScalarFn = std::function<Var(Graph&, const std::vector<Var>&)>;

// Largest per-input relative error between the tape gradient and central
// differences: |a - n|_inf / max(|a|_inf, |n|_inf, 1e-12).
inline double gradient_error(const ScalarFn& f, const std::vector<Mat>& inputs, double step = 1e-6) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(g.variable(m));
  Var out = f(g, vars);
  g.backward(out);

  auto eval = [&](const std::vector<Mat>& xs) {
    Graph h;
    std::vector<Var> vs;
    for (const auto& m : xs) vs.push_back(h.variable(m));
    return f(h, vs).value()(0, 0);
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Mat analytic = g.grad(vars[k]);
    Mat numeric(inputs[k].rows(), inputs[k].cols());
    std::vector<Mat> xs = inputs;
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k].data()[i];
      xs[k].data()[i] = x0 + step;
      const double up = eval(xs);
      xs[k].data()[i] = x0 - step;
      const double down = eval(xs);
      xs[k].data()[i] = x0;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    const double scale =
        std::max({analytic.lpNorm<Eigen::Infinity>(), numeric.lpNorm<Eigen::Infinity>(), 1e-12});
    worst = std::max(worst, (analytic - numeric).lpNorm<Eigen::Infinity>() / scale);
  }
  return worst;
}

// Fourth-order central difference of f with respect to x (x is restored).
// Keeps roundoff well below the tape error on tensors whose gradient is
// orders of magnitude smaller than the loss.
inline double five_point_derivative(const std::function<double()>& f, double& x, double step = 1e-4) {
  const double x0 = x;
  auto at = [&](double offset) {
    x = x0 + offset;
    return f();
  };
  const double d = (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) / (12.0 * step);
  x = x0;
  return d;
}

// Contracts a matrix-valued op with fixed random weights to get a scalar.
inline Var contract(Var x, const Mat& weights) {
  return hfbrt::ad::sum(hfbrt::ad::hadamard(x, x.graph->constant(weights)));
}

}  // namespace testutil
