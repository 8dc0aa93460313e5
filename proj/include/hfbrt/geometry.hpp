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

#include <Eigen/Dense>

#include "hfbrt/common.hpp"

namespace hfbrt {

// Array-of-subarrays geometry. The array lies in the x-y plane with the first
// element of the first subarray at the origin. All lengths in meters,
// frequencies in Hz.
struct ArrayConfig {
  int num_subarrays = 4;         // S, perfect square
  int elems_per_subarray = 256;  // S-bar, perfect square
  double sa_spacing = 5.6e-2;    // gap between neighbouring subarrays
  double ae_spacing = 5.0e-4;    // pitch between neighbouring elements
  double carrier_hz = 3.0e11;

  // Throws ConfigError when an invariant is violated.
  void validate() const;

  int sa_side() const;  // sqrt(S)
  int ae_side() const;  // sqrt(S-bar)
  int num_elements() const { return num_subarrays * elems_per_subarray; }
  double wavelength() const { return kSpeedOfLight / carrier_hz; }
  // Offset between the first elements of two neighbouring subarrays.
  double subarray_pitch() const { return (ae_side() - 1) * ae_spacing + sa_spacing; }
};

// 1-based (subarray, element) pair; rows/columns are 1-based as well.
struct ElementIndex {
  int sa = 1;
  int ae = 1;

  static ElementIndex from_rows(int m, int n, int m_bar, int n_bar, const ArrayConfig& cfg);

  int sa_row(const ArrayConfig& cfg) const;
  int sa_col(const ArrayConfig& cfg) const;
  int ae_row(const ArrayConfig& cfg) const;
  int ae_col(const ArrayConfig& cfg) const;

  // Position of this element in the vectorized channel: subarray-major,
  // element-minor, zero-based.
  int flat(const ArrayConfig& cfg) const { return (sa - 1) * cfg.elems_per_subarray + (ae - 1); }
  static ElementIndex from_flat(int flat, const ArrayConfig& cfg);

  bool valid(const ArrayConfig& cfg) const;
};

// Throws std::out_of_range for an index outside the array.
Eigen::Vector3d ae_position(const ElementIndex& idx, const ArrayConfig& cfg);

// 3 x (S * S-bar) matrix of all element positions in vectorization order.
Eigen::Matrix3Xd all_positions(const ArrayConfig& cfg);

// Largest distance between any two elements (diagonal of the bounding square).
double aperture(const ArrayConfig& cfg);

// Z = 2 D^2 / lambda. Aperture may be zero; wavelength must be positive.
double rayleigh_distance(double aperture_m, double wavelength_m);

}  // namespace hfbrt
