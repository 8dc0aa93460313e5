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

#include "hfbrt/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace hfbrt {

namespace {

double wavenumber(double freq_hz) { return 2.0 * kPi * freq_hz / kSpeedOfLight; }

double resolve_freq(const ArrayConfig& cfg, double freq_hz) { return freq_hz > 0.0 ? freq_hz : cfg.carrier_hz; }

}  // namespace

ArrayLayout::ArrayLayout(const ArrayConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int n = cfg_.num_elements();
  positions_ = all_positions(cfg_);
  squared_norms_ = positions_.colwise().squaredNorm().transpose();

  // x depends only on (sa row, ae row) and y only on (sa col, ae col).
  const int qb = cfg_.ae_side();
  const int grid = cfg_.sa_side() * qb;
  x_grid_.assign(grid, 0.0);
  y_grid_.assign(grid, 0.0);
  x_index_.resize(n);
  y_index_.resize(n);
  for (int e = 0; e < n; ++e) {
    const auto idx = ElementIndex::from_flat(e, cfg_);
    const int ix = (idx.sa_row(cfg_) - 1) * qb + (idx.ae_row(cfg_) - 1);
    const int iy = (idx.sa_col(cfg_) - 1) * qb + (idx.ae_col(cfg_) - 1);
    x_index_[e] = ix;
    y_index_[e] = iy;
    x_grid_[ix] = positions_(0, e);
    y_grid_[iy] = positions_(1, e);
  }
}

CVec ArrayLayout::far_field(double azimuth, double elevation, double distance, double freq_hz) const {
  if (!(distance > 0.0)) throw std::domain_error("path distance must be positive");
  const double k = wavenumber(freq_hz);
  const Eigen::Vector3d t = direction_vector(elevation, azimuth);
  const cdouble common = std::polar(1.0, -k * distance);
  std::vector<cdouble> ex(x_grid_.size()), ey(y_grid_.size());
  for (std::size_t i = 0; i < x_grid_.size(); ++i) ex[i] = common * std::polar(1.0, k * x_grid_[i] * t.x());
  for (std::size_t i = 0; i < y_grid_.size(); ++i) ey[i] = std::polar(1.0, k * y_grid_[i] * t.y());
  const int n = num_elements();
  CVec out(n);
  for (int e = 0; e < n; ++e) out[e] = ex[x_index_[e]] * ey[y_index_[e]];
  return out;
}

CVec ArrayLayout::near_field(double azimuth, double elevation, double distance, double freq_hz) const {
  if (!(distance > 0.0)) throw std::domain_error("path distance must be positive");
  const double k = wavenumber(freq_hz);
  const Eigen::Vector3d t = direction_vector(elevation, azimuth);
  const cdouble common = std::polar(1.0, -k * distance);
  const int n = num_elements();
  CVec out(n);
  for (int e = 0; e < n; ++e) {
    const double proj = positions_(0, e) * t.x() + positions_(1, e) * t.y();
    // |p - r t| - r, written to avoid cancellation for large r.
    const double num = squared_norms_[e] - 2.0 * distance * proj;
    const double dist = std::sqrt(distance * distance + num);
    const double excess = num / (dist + distance);
    out[e] = common * std::polar(1.0, -k * excess);
  }
  return out;
}

Vec ArrayLayout::excess_lengths(double azimuth, double elevation, double distance, bool near) const {
  if (!(distance > 0.0)) throw std::domain_error("path distance must be positive");
  const Eigen::Vector3d t = direction_vector(elevation, azimuth);
  const int n = num_elements();
  Vec out(n);
  for (int e = 0; e < n; ++e) {
    const double proj = positions_(0, e) * t.x() + positions_(1, e) * t.y();
    if (near) {
      const double num = squared_norms_[e] - 2.0 * distance * proj;
      out[e] = num / (std::sqrt(distance * distance + num) + distance);
    } else {
      out[e] = -proj;
    }
  }
  return out;
}

Eigen::Vector3d direction_vector(double elevation, double azimuth) {
  const double st = std::sin(elevation);
  return {st * std::cos(azimuth), st * std::sin(azimuth), std::cos(elevation)};
}

CVec near_field_response(double azimuth, double elevation, double distance, const ArrayConfig& cfg,
                         double freq_hz) {
  return ArrayLayout(cfg).near_field(azimuth, elevation, distance, resolve_freq(cfg, freq_hz));
}

CVec far_field_response(double azimuth, double elevation, double distance, const ArrayConfig& cfg,
                        double freq_hz) {
  return ArrayLayout(cfg).far_field(azimuth, elevation, distance, resolve_freq(cfg, freq_hz));
}

CVec select_response(double azimuth, double elevation, double distance, double rayleigh, const ArrayConfig& cfg,
                     double freq_hz, bool* near_field) {
  if (!(rayleigh > 0.0)) throw std::domain_error("Rayleigh distance must be positive");
  const bool near = distance < rayleigh;
  if (near_field) *near_field = near;
  return near ? near_field_response(azimuth, elevation, distance, cfg, freq_hz)
              : far_field_response(azimuth, elevation, distance, cfg, freq_hz);
}

double los_path_gain(double los_distance, double freq_hz, double absorption_per_m) {
  if (!(los_distance > 0.0) || !(freq_hz > 0.0)) throw std::domain_error("LoS distance and frequency must be positive");
  return kSpeedOfLight / (4.0 * kPi * freq_hz * los_distance) * std::exp(-0.5 * absorption_per_m * los_distance);
}

cdouble reflection_coefficient(double incidence, cdouble refractive_index, double roughness, double freq_hz) {
  if (!(incidence >= 0.0 && incidence < kPi / 2.0))
    throw std::domain_error("angle of incidence must lie in [0, pi/2)");
  const double ci = std::cos(incidence);
  const cdouble refraction = std::asin(std::sin(incidence) / refractive_index);
  const cdouble ct = std::cos(refraction);
  const cdouble fresnel = (ci - refractive_index * ct) / (ci + refractive_index * ct);
  const double rough = 8.0 * kPi * kPi * freq_hz * freq_hz * roughness * roughness * ci * ci /
                       (kSpeedOfLight * kSpeedOfLight);
  return fresnel * std::exp(-rough);
}

double nlos_path_gain(cdouble reflection, double los_gain) {
  if (!(los_gain >= 0.0)) throw std::domain_error("LoS gain must be non-negative");
  return std::abs(reflection) * los_gain;
}

PathSet sample_paths(const ScenarioConfig& scenario, Rng& rng) {
  if (!(scenario.nlos_distance_max >= scenario.nlos_distance_min) || !(scenario.nlos_distance_min > 0.0))
    throw ConfigError("NLoS distance range is empty");
  std::uniform_int_distribution<int> count(scenario.paths_min, scenario.paths_max);
  std::uniform_real_distribution<double> azimuth(-kPi, kPi);
  std::uniform_real_distribution<double> elevation(-kPi / 2.0, kPi / 2.0);
  std::uniform_real_distribution<double> incidence(0.0, kPi / 2.0);
  std::uniform_real_distribution<double> distance(scenario.nlos_distance_min, scenario.nlos_distance_max);
  std::uniform_real_distribution<double> delay(scenario.nlos_delay_min, scenario.nlos_delay_max);

  PathSet set;
  const int L = count(rng);
  set.paths.resize(L);
  for (int l = 0; l < L; ++l) {
    PathParams& p = set.paths[l];
    p.azimuth = azimuth(rng);
    p.elevation = elevation(rng);
    if (l == 0) {
      p.is_los = true;
      p.distance = scenario.los_distance;
      p.delay = scenario.los_delay;
    } else {
      p.distance = distance(rng);
      p.delay = delay(rng);
      p.incidence = incidence(rng);
    }
  }
  fill_gains(set, scenario.array.carrier_hz, scenario.material,
             scenario.material.absorption_at(scenario.array.carrier_hz));
  return set;
}

void fill_gains(PathSet& set, double freq_hz, const MaterialModel& material, double absorption_per_m) {
  set.gains.assign(set.paths.size(), 0.0);
  if (set.paths.empty()) return;
  const double los = los_path_gain(set.paths.front().distance, freq_hz, absorption_per_m);
  for (std::size_t l = 0; l < set.paths.size(); ++l) {
    const auto& p = set.paths[l];
    set.gains[l] = p.is_los ? los
                            : nlos_path_gain(reflection_coefficient(p.incidence, material.refractive_index,
                                                                    material.roughness, freq_hz),
                                             los);
  }
}

CVec synthesize_channel(const PathSet& set, double freq_hz, const ArrayLayout& layout, double rayleigh,
                        double* gamma, int* near_field_paths) {
  if (set.paths.empty()) throw DegenerateChannelError("path set is empty");
  if (set.gains.size() != set.paths.size()) throw ShapeError("path gains are not filled");
  if (!(rayleigh > 0.0)) throw std::domain_error("Rayleigh distance must be positive");
  const int n = layout.num_elements();
  CVec h = CVec::Zero(n);
  int near = 0;
  for (std::size_t l = 0; l < set.paths.size(); ++l) {
    const auto& p = set.paths[l];
    const bool is_near = p.distance < rayleigh;
    near += is_near;
    const cdouble coeff = set.gains[l] * std::polar(1.0, -2.0 * kPi * freq_hz * p.delay);
    if (is_near)
      h += coeff * layout.near_field(p.azimuth, p.elevation, p.distance, freq_hz);
    else
      h += coeff * layout.far_field(p.azimuth, p.elevation, p.distance, freq_hz);
  }
  const double norm2 = h.squaredNorm();
  if (!(norm2 > 0.0) || !std::isfinite(norm2))
    throw DegenerateChannelError("channel vanishes before normalization (all path contributions cancel)");
  const double g = std::sqrt(static_cast<double>(n) / norm2);
  h *= g;
  if (gamma) *gamma = g;
  if (near_field_paths) *near_field_paths = near;
  return h;
}

CVec synthesize_channel(const PathSet& paths, double freq_hz, const ArrayConfig& cfg, double rayleigh) {
  return synthesize_channel(paths, freq_hz, ArrayLayout(cfg), rayleigh);
}

std::vector<double> subcarrier_frequencies(double carrier_hz, int subcarriers, double bandwidth_hz) {
  if (subcarriers < 1) throw ConfigError("subcarrier count must be >= 1");
  std::vector<double> f(subcarriers);
  for (int k = 1; k <= subcarriers; ++k)
    f[k - 1] = carrier_hz + (k - 1 - (subcarriers - 1) / 2.0) * bandwidth_hz / subcarriers;
  return f;
}

ChannelRealization wideband_channel(const PathSet& paths, const ScenarioConfig& scenario, const ArrayLayout& layout,
                                    int subcarriers, double bandwidth_hz) {
  if (subcarriers < 1) throw ConfigError("subcarrier count must be >= 1");
  if (subcarriers > 1 && !(bandwidth_hz > 0.0)) throw ConfigError("bandwidth must be positive");
  ChannelRealization out;
  out.freqs = subcarrier_frequencies(scenario.array.carrier_hz, subcarriers, bandwidth_hz);
  out.h.resize(subcarriers, layout.num_elements());
  out.gammas.resize(subcarriers);
  const double z = scenario.rayleigh();
  PathSet local = paths;
  if (subcarriers == 1) {
    fill_gains(local, out.freqs[0], scenario.material, scenario.material.absorption_at(out.freqs[0]));
    out.h.row(0) = synthesize_channel(local, out.freqs[0], layout, z, &out.gammas[0], &out.near_field_paths).transpose();
    return out;
  }
  if (paths.paths.empty()) throw DegenerateChannelError("path set is empty");

  // Path coefficients per subcarrier, including the common -k r phase.
  const std::size_t L = paths.paths.size();
  std::vector<std::vector<cdouble>> coeff(subcarriers, std::vector<cdouble>(L));
  for (int k = 0; k < subcarriers; ++k) {
    const double f = out.freqs[k];
    fill_gains(local, f, scenario.material, scenario.material.absorption_at(f));
    for (std::size_t l = 0; l < L; ++l) {
      const auto& p = paths.paths[l];
      coeff[k][l] = local.gains[l] * std::polar(1.0, -2.0 * kPi * f * p.delay) *
                    std::polar(1.0, -wavenumber(f) * p.distance);
    }
  }

  // The element phase -k_f * excess is linear in f on the uniform subcarrier
  // grid, so each row follows from the previous one by a fixed rotation.
  const int n = layout.num_elements();
  const double step = wavenumber(out.freqs[1]) - wavenumber(out.freqs[0]);
  CMat cols = CMat::Zero(n, subcarriers);  // transposed for contiguous updates
  out.near_field_paths = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& p = paths.paths[l];
    const bool near = p.distance < z;
    out.near_field_paths += near;
    const Vec excess = layout.excess_lengths(p.azimuth, p.elevation, p.distance, near);
    CVec phase(n), rot(n);
    const double k0 = wavenumber(out.freqs[0]);
    for (int e = 0; e < n; ++e) {
      phase[e] = std::polar(1.0, -k0 * excess[e]);
      rot[e] = std::polar(1.0, -step * excess[e]);
    }
    for (int k = 0; k < subcarriers; ++k) {
      cols.col(k) += coeff[k][l] * phase;
      if (k + 1 < subcarriers) phase = phase.cwiseProduct(rot);
    }
  }
  for (int k = 0; k < subcarriers; ++k) {
    const double norm2 = cols.col(k).squaredNorm();
    if (!(norm2 > 0.0) || !std::isfinite(norm2))
      throw DegenerateChannelError("channel vanishes before normalization (all path contributions cancel)");
    out.gammas[k] = std::sqrt(static_cast<double>(n) / norm2);
    cols.col(k) *= out.gammas[k];
  }
  out.h = cols.transpose();
  return out;
}

ChannelRealization wideband_channel(const PathSet& paths, const ScenarioConfig& scenario, int subcarriers,
                                    double bandwidth_hz) {
  return wideband_channel(paths, scenario, ArrayLayout(scenario.array), subcarriers, bandwidth_hz);
}

ChannelRealization realize_channel(const PathSet& paths, const ScenarioConfig& scenario, const ArrayLayout& layout) {
  return wideband_channel(paths, scenario, layout, scenario.subcarriers, scenario.bandwidth_hz);
}

}  // namespace hfbrt
