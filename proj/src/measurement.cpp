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

#include "hfbrt/measurement.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

namespace hfbrt {

PseudoInverse pseudoinverse(const Mat& a) {
  PseudoInverse out;
  if (a.size() == 0) {
    out.matrix = Mat::Zero(a.cols(), a.rows());
    return out;
  }
  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  const double tol = std::numeric_limits<double>::epsilon() * std::max(a.rows(), a.cols()) * smax;
  Vec inv = Vec::Zero(sv.size());
  double smin = smax;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > tol) {
      inv[i] = 1.0 / sv[i];
      ++out.rank;
      smin = sv[i];
    }
  }
  out.condition = out.rank ? smax / smin : std::numeric_limits<double>::infinity();
  out.matrix = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return out;
}

Vec complex_to_real(const CVec& v) {
  Vec out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return out;
}

CVec real_to_complex(const Vec& v) {
  if (v.size() % 2 != 0) throw ShapeError("real_to_complex: odd-length input");
  const Eigen::Index n = v.size() / 2;
  CVec out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = {v[i], v[n + i]};
  return out;
}

Mat real_expand(const CMat& a) {
  const Eigen::Index r = a.rows(), c = a.cols();
  Mat out(2 * r, 2 * c);
  out.topLeftCorner(r, c) = a.real();
  out.topRightCorner(r, c) = -a.imag();
  out.bottomLeftCorner(r, c) = a.imag();
  out.bottomRightCorner(r, c) = a.real();
  return out;
}

Mat complex_rows_to_real(const CMat& a) {
  Mat out(a.rows(), 2 * a.cols());
  out.leftCols(a.cols()) = a.real();
  out.rightCols(a.cols()) = a.imag();
  return out;
}

CMat real_rows_to_complex(const Mat& a) {
  if (a.cols() % 2 != 0) throw ShapeError("real_rows_to_complex: odd column count");
  const Eigen::Index n = a.cols() / 2;
  CMat out(a.rows(), n);
  out.real() = a.leftCols(n);
  out.imag() = a.rightCols(n);
  return out;
}

MeasurementOperator::MeasurementOperator(const ArrayConfig& cfg, int n_pilots, CMat block_weights,
                                         std::uint64_t seed)
    : cfg_(cfg), n_pilots_(n_pilots), weights_(std::move(block_weights)), seed_(seed) {
  cfg_.validate();
  if (n_pilots_ < 1) throw ConfigError("n_pilots must be >= 1");
  if (weights_.rows() != static_cast<Eigen::Index>(n_pilots_) * cfg_.num_subarrays ||
      weights_.cols() != cfg_.elems_per_subarray)
    throw ShapeError("combiner weights must be (N_p * S) x S-bar");
  build_real_forms();
}

MeasurementOperator MeasurementOperator::generate(const ArrayConfig& cfg, int n_pilots, Rng& rng,
                                                  std::uint64_t seed) {
  cfg.validate();
  if (n_pilots < 1) throw ConfigError("n_pilots must be >= 1");
  const double mag = 1.0 / std::sqrt(static_cast<double>(cfg.elems_per_subarray));
  std::bernoulli_distribution coin(0.5);
  CMat w(static_cast<Eigen::Index>(n_pilots) * cfg.num_subarrays, cfg.elems_per_subarray);
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = coin(rng) ? mag : -mag;
  return MeasurementOperator(cfg, n_pilots, std::move(w), seed);
}

MeasurementOperator MeasurementOperator::from_seed(const ArrayConfig& cfg, int n_pilots, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0xC0B1);
  return generate(cfg, n_pilots, rng, seed);
}

CMat MeasurementOperator::combiner(int pilot) const {
  if (pilot < 0 || pilot >= n_pilots_) throw std::out_of_range("pilot index");
  const int S = cfg_.num_subarrays, Sb = cfg_.elems_per_subarray;
  CMat w = CMat::Zero(num_elements(), S);
  for (int s = 0; s < S; ++s)
    w.block(static_cast<Eigen::Index>(s) * Sb, s, Sb, 1) = weights_.row(pilot * S + s).adjoint();
  return w;
}

CMat MeasurementOperator::stacked_hermitian() const {
  const int S = cfg_.num_subarrays, Sb = cfg_.elems_per_subarray;
  CMat a = CMat::Zero(num_measurements(), num_elements());
  for (int p = 0; p < n_pilots_; ++p)
    for (int s = 0; s < S; ++s)
      a.block(p * S + s, static_cast<Eigen::Index>(s) * Sb, 1, Sb) = weights_.row(p * S + s);
  return a;
}

void MeasurementOperator::build_real_forms() {
  const int S = cfg_.num_subarrays, Sb = cfg_.elems_per_subarray;
  const Eigen::Index M = num_measurements(), N = num_elements();
  real_ = real_expand(stacked_hermitian());
  pinv_ = Mat::Zero(2 * N, 2 * M);

  // Under a row/column permutation the real operator is block-diagonal with
  // one 2 N_p x 2 S-bar block per subarray.
  condition_ = 0.0;
  for (int s = 0; s < S; ++s) {
    CMat block(n_pilots_, Sb);
    for (int p = 0; p < n_pilots_; ++p) block.row(p) = weights_.row(p * S + s);
    const PseudoInverse pi = pseudoinverse(real_expand(block));
    if (pi.rank < 2 * n_pilots_) {
      std::ostringstream msg;
      msg << "combiner block of subarray " << s + 1 << " is rank deficient (rank " << pi.rank << " < "
          << 2 * n_pilots_ << ", condition number " << pi.condition << ")";
      throw NumericalError(msg.str());
    }
    condition_ = std::max(condition_, pi.condition);
    // Block rows: re(p), im(p); block cols: re(e), im(e) for e in subarray s.
    for (int bi = 0; bi < 2 * Sb; ++bi) {
      const Eigen::Index col = (bi < Sb ? 0 : N) + static_cast<Eigen::Index>(s) * Sb + (bi % Sb);
      for (int bj = 0; bj < 2 * n_pilots_; ++bj) {
        const int p = bj % n_pilots_;
        const Eigen::Index row = (bj < n_pilots_ ? 0 : M) + static_cast<Eigen::Index>(p) * S + s;
        pinv_(col, row) = pi.matrix(bi, bj);
      }
    }
  }
}

CVec MeasurementOperator::apply(const CVec& x) const {
  if (x.size() != num_elements()) throw ShapeError("operator applied to a vector of the wrong length");
  const int S = cfg_.num_subarrays;
  CVec y(num_measurements());
  for (int p = 0; p < n_pilots_; ++p)
    for (int s = 0; s < S; ++s)
      y[p * S + s] = combine(p, s, x);
  return y;
}

cdouble MeasurementOperator::combine(int pilot, int subarray, const CVec& element_values) const {
  const int S = cfg_.num_subarrays, Sb = cfg_.elems_per_subarray;
  return (weights_.row(pilot * S + subarray) * element_values.segment(static_cast<Eigen::Index>(subarray) * Sb, Sb))(0, 0);
}

double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

Observation observe(const ChannelRealization& h, const MeasurementOperator& op, double snr_db, Rng& rng) {
  Observation obs = observe_with_variance(h, op, noise_variance(snr_db), rng);
  obs.snr_db = snr_db;
  return obs;
}

Observation observe_with_variance(const ChannelRealization& h, const MeasurementOperator& op, double noise_var,
                                  Rng& rng) {
  if (h.h.cols() != op.num_elements()) throw ShapeError("channel length does not match the combiner");
  if (!(noise_var >= 0.0)) throw std::domain_error("noise variance must be non-negative");
  const int K = h.subcarriers();
  const int S = op.array().num_subarrays;
  const Eigen::Index M = op.num_measurements(), N = op.num_elements();
  Observation obs;
  obs.noise_var = noise_var;
  obs.snr_db = noise_var > 0.0 ? -10.0 * std::log10(noise_var) : std::numeric_limits<double>::infinity();
  obs.y.resize(K, 2 * M);
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_var / 2.0));
  CVec noise(N);
  for (int k = 0; k < K; ++k) {
    CVec y = op.apply(h.h.row(k).transpose());
    if (noise_var > 0.0) {
      for (int p = 0; p < op.n_pilots(); ++p) {
        for (Eigen::Index e = 0; e < N; ++e) {
          const double re = gauss(rng);
          const double im = gauss(rng);
          noise[e] = {re, im};
        }
        for (int s = 0; s < S; ++s) y[p * S + s] += op.combine(p, s, noise);
      }
    }
    obs.y.row(k) = complex_to_real(y).transpose();
  }
  return obs;
}

}  // namespace hfbrt
