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

#include <doctest.h>

#include "hfbrt/estimators.hpp"
#include "hfbrt/measurement.hpp"
#include "test_util.hpp"

using namespace hfbrt;

namespace {

ArrayConfig toy_array() {
  ArrayConfig cfg;
  cfg.num_subarrays = 4;
  cfg.elems_per_subarray = 16;
  return cfg;
}

CVec random_cvec(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVec v(n);
  for (auto& x : v) x = {g(rng), g(rng)};
  return v;
}

ChannelRealization as_realization(const CVec& h) {
  ChannelRealization r;
  r.h = h.transpose();
  r.freqs = {3e11};
  r.gammas = {1.0};
  return r;
}

}  // namespace

TEST_CASE("complex/real stacking") {
  CVec v(1);
  v[0] = {1.0, 2.0};
  const Vec r = complex_to_real(v);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 2.0);
  Rng rng(1);
  const CVec x = random_cvec(37, rng);
  CHECK(real_to_complex(complex_to_real(x)) == x);
  CHECK_THROWS_AS(real_to_complex(Vec::Zero(3)), ShapeError);
}

TEST_CASE("real expansion maps products") {
  Rng rng(2);
  CMat w(4, 4);
  for (Eigen::Index j = 0; j < 4; ++j) w.col(j) = random_cvec(4, rng);
  const CVec v = random_cvec(4, rng);
  const Mat big = real_expand(w);
  CHECK(big.rows() == 8);
  CHECK((big * complex_to_real(v) - complex_to_real(w * v)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(big.topLeftCorner(4, 4) == w.real());
  CHECK(big.topRightCorner(4, 4) == -w.imag());
  CHECK(big.bottomLeftCorner(4, 4) == w.imag());
  CHECK(big.bottomRightCorner(4, 4) == w.real());
}

TEST_CASE("combiners are block diagonal with unit-norm columns") {
  const ArrayConfig cfg = toy_array();
  const auto op = MeasurementOperator::from_seed(cfg, 8, 3);
  const double mag = 0.25;
  for (int p = 0; p < 8; ++p) {
    const CMat w = op.combiner(p);
    REQUIRE(w.rows() == 64);
    REQUIRE(w.cols() == 4);
    for (int s = 0; s < 4; ++s) {
      int nonzero = 0;
      for (int e = 0; e < 64; ++e) {
        const bool inside = e / 16 == s;
        if (inside) {
          CHECK(std::abs(std::abs(w(e, s)) - mag) < 1e-15);
          CHECK(w(e, s).imag() == 0.0);
          ++nonzero;
        } else {
          CHECK(w(e, s) == cdouble(0.0));
        }
      }
      CHECK(nonzero == 16);
      CHECK(std::abs(w.col(s).norm() - 1.0) < 1e-14);
    }
  }
}

TEST_CASE("full-size operator dimensions") {
  const ArrayConfig cfg;
  const auto op = MeasurementOperator::from_seed(cfg, 128, 1);
  CHECK(op.stacked_hermitian().rows() == 512);
  CHECK(op.stacked_hermitian().cols() == 1024);
  CHECK(op.real_operator().rows() == 1024);
  CHECK(op.real_operator().cols() == 2048);
  CHECK(op.real_pseudoinverse().rows() == 2048);
  CHECK(op.real_pseudoinverse().cols() == 1024);
}

TEST_CASE("real operator is the expansion of the stacked combiner") {
  const auto op = MeasurementOperator::from_seed(toy_array(), 8, 9);
  CHECK((op.real_operator() - real_expand(op.stacked_hermitian())).cwiseAbs().maxCoeff() == 0.0);
  Rng rng(4);
  const CVec h = random_cvec(64, rng);
  CHECK((op.apply(h) - op.stacked_hermitian() * h).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("block-assembled pseudoinverse matches the dense one") {
  const auto op = MeasurementOperator::from_seed(toy_array(), 8, 9);
  const PseudoInverse dense = pseudoinverse(op.real_operator());
  CHECK(dense.rank == 64);
  CHECK((dense.matrix - op.real_pseudoinverse()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Moore-Penrose conditions") {
  Rng rng(6);
  const Mat a = testutil::random_mat(5, 9, rng);
  const Mat p = pseudoinverse(a).matrix;
  CHECK((a * p * a - a).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((p * a * p - p).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(((a * p).transpose() - a * p).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(((p * a).transpose() - p * a).cwiseAbs().maxCoeff() < 1e-12);
  Mat deficient = a;
  deficient.row(4) = deficient.row(0) + deficient.row(1);
  CHECK(pseudoinverse(deficient).rank == 4);
}

TEST_CASE("noiseless observation equals the combined channel") {
  const auto op = MeasurementOperator::from_seed(toy_array(), 8, 2);
  Rng rng(3);
  const CVec h = random_cvec(64, rng);
  const Observation obs = observe_with_variance(as_realization(h), op, 0.0, rng);
  REQUIRE(obs.y.rows() == 1);
  REQUIRE(obs.y.cols() == 64);
  CHECK((obs.y.row(0).transpose() - complex_to_real(op.stacked_hermitian() * h)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("observation is linear without noise") {
  const auto op = MeasurementOperator::from_seed(toy_array(), 8, 2);
  Rng rng(3);
  const CVec h1 = random_cvec(64, rng), h2 = random_cvec(64, rng);
  const cdouble a(0.3, -1.2), b(2.0, 0.5);
  auto y = [&](const CVec& h) {
    return real_to_complex(observe_with_variance(as_realization(h), op, 0.0, rng).y.row(0).transpose());
  };
  CHECK((y(a * h1 + b * h2) - (a * y(h1) + b * y(h2))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("SNR convention") {
  CHECK(noise_variance(0.0) == 1.0);
  CHECK(noise_variance(10.0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(noise_variance(20.0) == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("observations are reproducible") {
  const auto op = MeasurementOperator::from_seed(toy_array(), 8, 2);
  Rng g(1);
  const auto ch = as_realization(random_cvec(64, g));
  Rng a(99), b(99);
  CHECK(observe(ch, op, 5.0, a).y == observe(ch, op, 5.0, b).y);
}

TEST_CASE("element-domain noise statistics") {
  // Identity-like combiner on a single element: the combined noise equals the
  // element noise, so its real and imaginary parts each have variance 1/2.
  ArrayConfig cfg;
  cfg.num_subarrays = 1;
  cfg.elems_per_subarray = 1;
  const auto op = MeasurementOperator::from_seed(cfg, 1, 1);
  ChannelRealization zero;
  zero.h = CMat::Zero(1, 1);
  Rng rng(12);
  double sr = 0, si = 0, n = 0;
  for (int i = 0; i < 1000000; ++i) {
    const Observation obs = observe(zero, op, 0.0, rng);
    sr += obs.y(0, 0) * obs.y(0, 0);
    si += obs.y(0, 1) * obs.y(0, 1);
    n += 1;
  }
  CHECK(std::abs(sr / n - 0.5) < 0.005);
  CHECK(std::abs(si / n - 0.5) < 0.005);
}

TEST_CASE("colored noise after combining") {
  const auto op = MeasurementOperator::from_seed(toy_array(), 2, 5);
  ChannelRealization zero;
  zero.h = CMat::Zero(1, 64);
  Rng rng(1);
  double var = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = observe(zero, op, 0.0, rng).y(0, 1);
    var += v * v;
  }
  // Unit-norm combiner columns keep the per-component variance at 1/2.
  CHECK(std::abs(var / n - 0.5) < 0.02);
}

TEST_CASE("dimension mismatch") {
  const auto op = MeasurementOperator::from_seed(toy_array(), 8, 2);
  ChannelRealization bad;
  bad.h = CMat::Zero(1, 10);
  Rng rng(1);
  CHECK_THROWS_AS(observe(bad, op, 0.0, rng), ShapeError);
}
