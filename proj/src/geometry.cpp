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

#include "hfbrt/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hfbrt {

namespace {

int exact_sqrt(int v) {
  if (v <= 0) return -1;
  int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(v))));
  return r * r == v ? r : -1;
}

}  // namespace

void ArrayConfig::validate() const {
  if (exact_sqrt(num_subarrays) < 0)
    throw ConfigError("num_subarrays must be a positive perfect square, got " +
                      std::to_string(num_subarrays));
  if (exact_sqrt(elems_per_subarray) < 0)
    throw ConfigError("elems_per_subarray must be a positive perfect square, got " +
                      std::to_string(elems_per_subarray));
  if (!(ae_spacing >= 0.0)) throw ConfigError("ae_spacing must be non-negative");
  if (num_subarrays > 1 && !(sa_spacing > 0.0))
    throw ConfigError("sa_spacing must be positive so subarrays do not overlap");
  if (!(carrier_hz > 0.0)) throw ConfigError("carrier_hz must be positive");
}

int ArrayConfig::sa_side() const { return exact_sqrt(num_subarrays); }
int ArrayConfig::ae_side() const { return exact_sqrt(elems_per_subarray); }

ElementIndex ElementIndex::from_rows(int m, int n, int m_bar, int n_bar, const ArrayConfig& cfg) {
  const int q = cfg.sa_side();
  const int qb = cfg.ae_side();
  if (m < 1 || m > q || n < 1 || n > q || m_bar < 1 || m_bar > qb || n_bar < 1 || n_bar > qb)
    throw std::out_of_range("element row/column out of range");
  return {(m - 1) * q + n, (m_bar - 1) * qb + n_bar};
}

int ElementIndex::sa_row(const ArrayConfig& cfg) const { return (sa - 1) / cfg.sa_side() + 1; }
int ElementIndex::sa_col(const ArrayConfig& cfg) const { return (sa - 1) % cfg.sa_side() + 1; }
int ElementIndex::ae_row(const ArrayConfig& cfg) const { return (ae - 1) / cfg.ae_side() + 1; }
int ElementIndex::ae_col(const ArrayConfig& cfg) const { return (ae - 1) % cfg.ae_side() + 1; }

ElementIndex ElementIndex::from_flat(int flat, const ArrayConfig& cfg) {
  if (flat < 0 || flat >= cfg.num_elements()) throw std::out_of_range("flat element index");
  return {flat / cfg.elems_per_subarray + 1, flat % cfg.elems_per_subarray + 1};
}

bool ElementIndex::valid(const ArrayConfig& cfg) const {
  return sa >= 1 && sa <= cfg.num_subarrays && ae >= 1 && ae <= cfg.elems_per_subarray;
}

Eigen::Vector3d ae_position(const ElementIndex& idx, const ArrayConfig& cfg) {
  if (!idx.valid(cfg))
    throw std::out_of_range("element index (" + std::to_string(idx.sa) + ", " +
                            std::to_string(idx.ae) + ") outside the array");
  const double pitch = cfg.subarray_pitch();
  const double x = (idx.sa_row(cfg) - 1) * pitch + (idx.ae_row(cfg) - 1) * cfg.ae_spacing;
  const double y = (idx.sa_col(cfg) - 1) * pitch + (idx.ae_col(cfg) - 1) * cfg.ae_spacing;
  return {x, y, 0.0};
}

Eigen::Matrix3Xd all_positions(const ArrayConfig& cfg) {
  const int n = cfg.num_elements();
  Eigen::Matrix3Xd out(3, n);
  for (int e = 0; e < n; ++e) out.col(e) = ae_position(ElementIndex::from_flat(e, cfg), cfg);
  return out;
}

double aperture(const ArrayConfig& cfg) {
  const double side = (cfg.sa_side() - 1) * cfg.subarray_pitch() + (cfg.ae_side() - 1) * cfg.ae_spacing;
  return side * std::sqrt(2.0);
}

double rayleigh_distance(double aperture_m, double wavelength_m) {
  if (!(aperture_m >= 0.0)) throw std::domain_error("aperture must be non-negative");
  if (!(wavelength_m > 0.0)) throw std::domain_error("wavelength must be positive");
  return 2.0 * aperture_m * aperture_m / wavelength_m;
}

}  // namespace hfbrt
