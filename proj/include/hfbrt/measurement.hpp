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

#include <cstdint>

#include "hfbrt/channel.hpp"
#include "hfbrt/common.hpp"
#include "hfbrt/geometry.hpp"

namespace hfbrt {

struct PseudoInverse {
  Mat matrix;
  int rank = 0;
  double condition = 0.0;  // sigma_max / sigma_min over the retained spectrum
};

// Moore-Penrose pseudoinverse via SVD with the cut-off
// eps * max(rows, cols) * sigma_max.
PseudoInverse pseudoinverse(const Mat& a);

// [Re(v); Im(v)].
Vec complex_to_real(const CVec& v);
// Inverse of complex_to_real; throws ShapeError for odd length.
CVec real_to_complex(const Vec& v);
// [[Re, -Im], [Im, Re]] so that real_expand(A) * complex_to_real(v) ==
// complex_to_real(A * v).
Mat real_expand(const CMat& a);
// Row-wise complex_to_real for K x N matrices.
Mat complex_rows_to_real(const CMat& a);
CMat real_rows_to_complex(const Mat& a);

// Hybrid analog combiner for all pilots. W_RF,p is block-diagonal: column s
// touches only the elements of subarray s. The nonzero weights are stored
// compactly as an (N_p * S) x S-bar matrix whose row p * S + s is the row of
// W_RF,p^H feeding RF chain s during pilot p.
class MeasurementOperator {
 public:
  MeasurementOperator(const ArrayConfig& cfg, int n_pilots, CMat block_weights, std::uint64_t seed = 0);

  // Weights drawn i.i.d. uniformly from {-1, +1} / sqrt(S-bar).
  static MeasurementOperator generate(const ArrayConfig& cfg, int n_pilots, Rng& rng, std::uint64_t seed = 0);
  static MeasurementOperator from_seed(const ArrayConfig& cfg, int n_pilots, std::uint64_t seed);

  const ArrayConfig& array() const { return cfg_; }
  int n_pilots() const { return n_pilots_; }
  int num_elements() const { return cfg_.num_elements(); }
  int num_measurements() const { return cfg_.num_subarrays * n_pilots_; }
  std::uint64_t seed() const { return seed_; }

  const CMat& block_weights() const { return weights_; }
  // Dense S*S-bar x S combiner of pilot p (0-based).
  CMat combiner(int pilot) const;
  // Stacked W_RF^H, (S N_p) x (S S-bar).
  CMat stacked_hermitian() const;
  // Real expansion of W_RF^H, (2 S N_p) x (2 S S-bar).
  const Mat& real_operator() const { return real_; }
  // Pseudoinverse of real_operator(), assembled from per-subarray blocks.
  const Mat& real_pseudoinverse() const { return pinv_; }
  double condition_number() const { return condition_; }

  // W_RF^H x for x in C^{S S-bar}.
  CVec apply(const CVec& x) const;
  // y_p = W_RF,p^H noise for a per-pilot element-domain noise vector.
  cdouble combine(int pilot, int subarray, const CVec& element_values) const;

 private:
  void build_real_forms();

  ArrayConfig cfg_;
  int n_pilots_;
  CMat weights_;
  std::uint64_t seed_;
  Mat real_;
  Mat pinv_;
  double condition_ = 0.0;
};

// Received pilots in stacked-real form, one row per subcarrier.
struct Observation {
  Mat y;  // K x 2 S N_p
  double snr_db = 0.0;
  double noise_var = 0.0;
};

// sigma_n^2 = 10^(-snr_db / 10): unit pilot power and unit average
// per-element channel power.
double noise_variance(double snr_db);

// y = W_RF^H (h + n_p) per pilot with n_p ~ CN(0, sigma^2 I) drawn in the
// element domain, independently for every pilot and subcarrier. The same
// operator is applied to every subcarrier row.
Observation observe(const ChannelRealization& h, const MeasurementOperator& op, double snr_db, Rng& rng);
Observation observe_with_variance(const ChannelRealization& h, const MeasurementOperator& op, double noise_var,
                                  Rng& rng);

}  // namespace hfbrt
