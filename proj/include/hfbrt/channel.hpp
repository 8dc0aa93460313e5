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
#include "hfbrt/config.hpp"
#include "hfbrt/geometry.hpp"

namespace hfbrt {

// Angles in radians, distances in meters, delays in seconds.
struct PathParams {
  double azimuth = 0.0;    // phi
  double elevation = 0.0;  // theta
  double distance = 1.0;   // r, distance to the (last) RF source
  double delay = 0.0;      // tau
  double incidence = 0.0;  // angle of incidence on the reflector, NLoS only
  bool is_los = false;
};

// Paths of one realization. Path 0 is the LoS path. `gains` holds the real
// path amplitudes at the frequency most recently passed to fill_gains().
struct PathSet {
  std::vector<PathParams> paths;
  std::vector<double> gains;

  int size() const { return static_cast<int>(paths.size()); }
};

// Wideband channel: row k is the channel at subcarrier frequency freqs[k].
// A narrowband realization has a single row at the carrier.
struct ChannelRealization {
  CMat h;
  std::vector<double> freqs;
  std::vector<double> gammas;  // normalization factor per row
  int near_field_paths = 0;    // number of paths synthesized with the spherical model

  int subcarriers() const { return static_cast<int>(h.rows()); }
};

// Precomputed element coordinates in vectorization order: subarray-major,
// element-minor. Shared read-only between workers.
class ArrayLayout {
 public:
  explicit ArrayLayout(const ArrayConfig& cfg);

  const ArrayConfig& config() const { return cfg_; }
  int num_elements() const { return static_cast<int>(x_index_.size()); }
  const Eigen::Matrix3Xd& positions() const { return positions_; }

  // Far-field response at frequency f via the separable row/column phases.
  CVec far_field(double azimuth, double elevation, double distance, double freq_hz) const;
  CVec near_field(double azimuth, double elevation, double distance, double freq_hz) const;
  // Per-element path length minus r, spherical (near) or planar (-p^T t).
  // Frequency independent, so wideband synthesis computes it once per path.
  Vec excess_lengths(double azimuth, double elevation, double distance, bool near) const;

 private:
  ArrayConfig cfg_;
  Eigen::Matrix3Xd positions_;
  std::vector<double> x_grid_, y_grid_;
  std::vector<int> x_index_, y_index_;
  Vec squared_norms_;
};

// t = [sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)].
Eigen::Vector3d direction_vector(double elevation, double azimuth);

// Spherical-wavefront response exp(-j 2 pi f/c |p - r t|). Throws
// std::domain_error for r <= 0. `freq_hz` defaults to the carrier.
CVec near_field_response(double azimuth, double elevation, double distance, const ArrayConfig& cfg,
                         double freq_hz = 0.0);

// Planar-wavefront response exp(-j 2 pi f/c (r - p^T t)), the first-order
// expansion of the spherical path length in 1/r.
CVec far_field_response(double azimuth, double elevation, double distance, const ArrayConfig& cfg,
                        double freq_hz = 0.0);

// Near field iff r < Z (boundary goes to the far field).
CVec select_response(double azimuth, double elevation, double distance, double rayleigh, const ArrayConfig& cfg,
                     double freq_hz = 0.0, bool* near_field = nullptr);

double los_path_gain(double los_distance, double freq_hz, double absorption_per_m);

// Rough-surface Fresnel reflection coefficient. The refraction angle uses
// principal-branch complex asin/cos. Throws std::domain_error unless
// 0 <= incidence < pi/2.
cdouble reflection_coefficient(double incidence, cdouble refractive_index, double roughness, double freq_hz);

double nlos_path_gain(cdouble reflection, double los_gain);

// Draws one realization. Path count is uniform over [paths_min, paths_max].
// Gains are filled at the carrier.
PathSet sample_paths(const ScenarioConfig& scenario, Rng& rng);

// Recomputes path gains at `freq_hz` with absorption `absorption_per_m`.
void fill_gains(PathSet& paths, double freq_hz, const MaterialModel& material, double absorption_per_m);

// gamma * sum_l alpha_l a(phi_l, theta_l, r_l) exp(-j 2 pi f tau_l) with
// |h|^2 = num_elements. Throws DegenerateChannelError for an all-zero sum.
CVec synthesize_channel(const PathSet& paths, double freq_hz, const ArrayLayout& layout, double rayleigh,
                        double* gamma = nullptr, int* near_field_paths = nullptr);
CVec synthesize_channel(const PathSet& paths, double freq_hz, const ArrayConfig& cfg, double rayleigh);

// f_k = f_c + (k - 1 - (K - 1)/2) B/K for k = 1..K.
std::vector<double> subcarrier_frequencies(double carrier_hz, int subcarriers, double bandwidth_hz);

// Row k synthesized at f_k with gains recomputed at f_k and absorption from
// the material table. The near/far threshold stays at the carrier value.
ChannelRealization wideband_channel(const PathSet& paths, const ScenarioConfig& scenario, const ArrayLayout& layout,
                                    int subcarriers, double bandwidth_hz);
ChannelRealization wideband_channel(const PathSet& paths, const ScenarioConfig& scenario, int subcarriers,
                                    double bandwidth_hz);

// Channel for the scenario's own subcarrier count and bandwidth.
ChannelRealization realize_channel(const PathSet& paths, const ScenarioConfig& scenario, const ArrayLayout& layout);

}  // namespace hfbrt
