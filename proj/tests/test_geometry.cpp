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

#include <set>

#include "hfbrt/geometry.hpp"

using namespace hfbrt;

namespace {

// Independent layout: enumerate rows/columns directly.
double brute_force_aperture(const ArrayConfig& cfg) {
  std::vector<Eigen::Vector2d> pts;
  const int sa = cfg.sa_side(), ae = cfg.ae_side();
  const double pitch = (ae - 1) * cfg.ae_spacing + cfg.sa_spacing;
  for (int m = 0; m < sa; ++m)
    for (int n = 0; n < sa; ++n)
      for (int mb = 0; mb < ae; ++mb)
        for (int nb = 0; nb < ae; ++nb)
          pts.emplace_back(m * pitch + mb * cfg.ae_spacing, n * pitch + nb * cfg.ae_spacing);
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::max(best, (pts[i] - pts[j]).norm());
  return best;
}

}  // namespace

TEST_CASE("origin element sits at the origin") {
  ArrayConfig cfg;
  CHECK(ae_position({1, 1}, cfg) == Eigen::Vector3d::Zero());
}

TEST_CASE("neighbouring element is one pitch along y") {
  ArrayConfig cfg;
  const auto p = ae_position({1, 2}, cfg);
  CHECK(p.x() == 0.0);
  CHECK(p.y() == doctest::Approx(5.0e-4).epsilon(1e-15));
  CHECK(p.z() == 0.0);
}

TEST_CASE("second subarray starts after the first plus the gap") {
  ArrayConfig cfg;
  const auto p = ae_position({2, 1}, cfg);
  CHECK(p.x() == 0.0);
  CHECK(p.y() == doctest::Approx(0.0635).epsilon(1e-14));
  CHECK(p.z() == 0.0);
}

TEST_CASE("out-of-range indices throw") {
  ArrayConfig cfg;
  CHECK_THROWS_AS(ae_position({0, 1}, cfg), std::out_of_range);
  CHECK_THROWS_AS(ae_position({5, 1}, cfg), std::out_of_range);
  CHECK_THROWS_AS(ae_position({1, 257}, cfg), std::out_of_range);
}

TEST_CASE("row/column index round trip and distinct positions") {
  ArrayConfig cfg;
  cfg.num_subarrays = 4;
  cfg.elems_per_subarray = 16;
  std::set<std::pair<double, double>> seen;
  for (int m = 1; m <= 2; ++m)
    for (int n = 1; n <= 2; ++n)
      for (int mb = 1; mb <= 4; ++mb)
        for (int nb = 1; nb <= 4; ++nb) {
          const auto idx = ElementIndex::from_rows(m, n, mb, nb, cfg);
          CHECK(idx.sa == (m - 1) * 2 + n);
          CHECK(idx.ae == (mb - 1) * 4 + nb);
          CHECK(idx.sa_row(cfg) == m);
          CHECK(idx.sa_col(cfg) == n);
          CHECK(idx.ae_row(cfg) == mb);
          CHECK(idx.ae_col(cfg) == nb);
          const auto back = ElementIndex::from_flat(idx.flat(cfg), cfg);
          CHECK(back.sa == idx.sa);
          CHECK(back.ae == idx.ae);
          const auto p = ae_position(idx, cfg);
          CHECK(p.z() == 0.0);
          seen.insert({p.x(), p.y()});
        }
  CHECK(seen.size() == 64);
}

TEST_CASE("all_positions follows the vectorization order") {
  ArrayConfig cfg;
  cfg.elems_per_subarray = 16;
  const auto P = all_positions(cfg);
  REQUIRE(P.cols() == 64);
  for (int e = 0; e < 64; ++e) CHECK(P.col(e) == ae_position(ElementIndex::from_flat(e, cfg), cfg));
}

TEST_CASE("aperture of the full array matches brute force") {
  ArrayConfig cfg;
  const double brute = brute_force_aperture(cfg);
  CHECK(aperture(cfg) == doctest::Approx(brute).epsilon(1e-12));
  CHECK(aperture(cfg) == doctest::Approx(0.071 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(aperture(cfg) == doctest::Approx(0.10041).epsilon(1e-4));
}

TEST_CASE("aperture of small arrays") {
  ArrayConfig one;
  one.num_subarrays = 1;
  one.elems_per_subarray = 1;
  CHECK(aperture(one) == 0.0);

  ArrayConfig four;
  four.num_subarrays = 1;
  four.elems_per_subarray = 4;
  four.ae_spacing = 1e-3;
  CHECK(aperture(four) == doctest::Approx(std::sqrt(2.0) * 1e-3).epsilon(1e-14));
  CHECK(aperture(four) == doctest::Approx(brute_force_aperture(four)).epsilon(1e-14));

  ArrayConfig odd;
  odd.num_subarrays = 9;
  odd.elems_per_subarray = 9;
  odd.sa_spacing = 3e-3;
  CHECK(aperture(odd) == doctest::Approx(brute_force_aperture(odd)).epsilon(1e-12));
}

TEST_CASE("Rayleigh distance") {
  ArrayConfig cfg;
  CHECK(cfg.wavelength() == doctest::Approx(1e-3).epsilon(1e-15));
  const double z = rayleigh_distance(aperture(cfg), cfg.wavelength());
  CHECK(z == doctest::Approx(2 * 0.071 * 0.071 * 2 / 1e-3).epsilon(1e-12));
  CHECK(z > 19.8);
  CHECK(z < 20.4);
  CHECK(rayleigh_distance(0.0, 1e-3) == 0.0);
  CHECK(rayleigh_distance(1.0, 0.5) == 4.0);
  CHECK_THROWS_AS(rayleigh_distance(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(rayleigh_distance(-1.0, 1.0), std::domain_error);
}

TEST_CASE("array config invariants") {
  ArrayConfig bad;
  bad.num_subarrays = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.elems_per_subarray = 10;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.sa_spacing = 0.0;  // neighbouring subarrays would share an edge element
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.carrier_hz = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_NOTHROW(ArrayConfig{}.validate());
}
