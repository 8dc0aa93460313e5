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

#include <filesystem>
#include <sstream>

#include "hfbrt/eval.hpp"

using namespace hfbrt;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("hfbrt_test_" + name)).string();
}

ScenarioConfig pmf_scenario(double rmin, double rmax, double los, double z) {
  ScenarioConfig sc = baseline_scenario();
  sc.nlos_distance_min = rmin;
  sc.nlos_distance_max = rmax;
  sc.los_distance = los;
  sc.rayleigh_override = z;
  return sc;
}

}  // namespace

TEST_CASE("baseline near-field PMF is binomial") {
  const NearFieldPmf pmf = near_field_pmf(baseline_scenario());
  CHECK_FALSE(pmf.los_near);
  CHECK(pmf.p_nlos == Rational(2, 3));
  const std::vector<Rational> expected = {Rational(1, 81), Rational(8, 81), Rational(24, 81), Rational(32, 81),
                                          Rational(16, 81), Rational(0)};
  REQUIRE(pmf.exact.size() == expected.size());
  Rational total = 0;
  for (std::size_t k = 0; k < expected.size(); ++k) {
    CHECK(pmf.exact[k] == expected[k]);
    total += pmf.exact[k];
  }
  CHECK(total == 1);
}

TEST_CASE("PMF point masses") {
  const NearFieldPmf none = near_field_pmf(pmf_scenario(20, 25, 30, 20));
  CHECK(none.exact[0] == 1);
  const NearFieldPmf all = near_field_pmf(pmf_scenario(10, 15, 12, 20));
  CHECK(all.los_near);
  CHECK(all.exact.back() == 1);
}

TEST_CASE("PMF over a path-count range sums to one") {
  ScenarioConfig sc = baseline_scenario();
  sc.paths_min = 2;
  sc.paths_max = 7;
  const NearFieldPmf pmf = near_field_pmf(sc);
  Rational total = 0;
  for (const auto& r : pmf.exact) total += r;
  CHECK(total == 1);
  CHECK(pmf.exact.size() == 8);
  CHECK(pmf.exact[7] == 0);
}

TEST_CASE("Monte-Carlo PMF agrees with the closed form") {
  const ScenarioConfig sc = baseline_scenario();
  const NearFieldPmf pmf = near_field_pmf(sc);
  const auto mc = monte_carlo_pmf(sc, 200000, 3);
  REQUIRE(mc.size() == pmf.probs.size());
  for (std::size_t k = 0; k < mc.size(); ++k) CHECK(std::abs(mc[k] - pmf.probs[k]) < 0.005);
  const std::string csv = format_pmf_csv(pmf, mc);
  CHECK(csv.rfind("near_field_paths,probability,exact,monte_carlo\n", 0) == 0);
  CHECK(csv.find("4,0.19753086419753") != std::string::npos);
}

TEST_CASE("oracle estimator hits the floor") {
  const SampleGenerator gen(toy_scenario());
  const auto rows = nmse_sweep(oracle_estimator(), gen, {0.0, 10.0}, 8, 1);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.nmse == 0.0);
    CHECK(r.nmse_db == kNmseFloorDb);
    CHECK(r.samples == 8);
  }
  CHECK(nmse_db_floored(1e-40) == kNmseFloorDb);
  CHECK(nmse_db_floored(0.1) == doctest::Approx(-10.0));
}

TEST_CASE("LS sweep falls with SNR and is reproducible") {
  const SampleGenerator gen(toy_scenario());
  const std::vector<double> grid = {0, 5, 10, 15, 20};
  const auto rows = nmse_sweep(ls_estimator(), gen, grid, 400, 7);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].nmse <= rows[i - 1].nmse);
  for (const auto& r : rows) CHECK(r.sem > 0.0);
  const auto again = nmse_sweep(ls_estimator(), gen, grid, 400, 7);
  CHECK(format_sweep_csv(rows, "ls") == format_sweep_csv(again, "ls"));
  const std::string csv = format_sweep_csv(rows, "ls");
  CHECK(csv.rfind("snr_db,nmse_db,stderr_db,nmse,stderr,samples,label\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("difference tables are antisymmetric") {
  const SampleGenerator gen(toy_scenario());
  ScenarioConfig far = toy_scenario();
  far.nlos_distance_min = 30;
  far.nlos_distance_max = 40;
  const SampleGenerator gen_far(far, std::make_shared<const MeasurementOperator>(gen.op()));
  const auto a = nmse_sweep(ls_estimator(), gen, {0, 10}, 50, 2);
  const auto b = nmse_sweep(ls_estimator(), gen_far, {0, 10}, 50, 2);
  const auto ab = delta_table(a, b, "x");
  const auto ba = delta_table(b, a, "x");
  for (std::size_t i = 0; i < ab.size(); ++i) CHECK(ab[i].delta_db == -ba[i].delta_db);
  CHECK_THROWS_AS(delta_table(a, {b.front()}, "x"), ShapeError);
  const auto rows = generalization_sweep(ls_estimator(), toy_scenario(), {{"far", far}}, {0, 10}, 50, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].delta_db == doctest::Approx(ab[0].delta_db).epsilon(1e-12));
}

TEST_CASE("wideband surface shape") {
  ScenarioConfig sc = toy_scenario();
  sc.subcarriers = 4;
  sc.bandwidth_hz = 2e9;
  const SampleGenerator gen(sc);
  const WidebandSurface s = wideband_surface(ls_estimator(), gen, {0, 20}, 20, 1);
  CHECK(s.nmse_db.rows() == 4);
  CHECK(s.nmse_db.cols() == 2);
  for (int j = 0; j < 2; ++j) {
    CHECK(s.min_db[j] <= s.max_db[j]);
    CHECK(s.std_db[j] >= 0.0);
  }
  CHECK(format_surface_csv(s).find('\n') != std::string::npos);
}

TEST_CASE("iteration trace of an untrained model is flat") {
  const ScenarioConfig sc = toy_scenario();
  const BRTModel m(hyper_for(sc, toy_hyper()), 1);
  const SampleGenerator gen(sc);
  const Batch val = generate_range(gen, 1, 2, 0, 16);
  const IterationTrace tr = iteration_trace(m, val);
  REQUIRE(tr.mean_nmse.size() == 3);
  CHECK(tr.mean_nmse[0] == tr.mean_nmse[2]);
  CHECK(tr.fraction_improved == 1.0);
}

TEST_CASE("inference benchmark") {
  const ScenarioConfig sc = toy_scenario();
  const BRTModel m(hyper_for(sc, toy_hyper()), 1);
  const auto rows = bench_inference(m, {1, 2, 4}, {1}, 3, 30);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) CHECK(r.per_sample_ms * r.batch == doctest::Approx(r.per_batch_ms));
  CHECK(rows[1].per_batch_ms < 2.0 * rows[0].per_batch_ms + 0.05);
  CHECK(rows[0].per_batch_ms < 2.0 * rows[1].per_batch_ms + 0.05);
  CHECK(rows[2].per_sample_ms <= rows[0].per_sample_ms * 1.25 + 0.01);
  CHECK(format_bench_csv(rows).rfind("subcarriers,batch,per_batch_ms,per_sample_ms\n", 0) == 0);
}

TEST_CASE("curve files round trip") {
  const std::vector<CurvePoint> pts = {{0.0, 1.5, "ls"}, {10.0, -3.25, "brt"}};
  const std::string path = temp_path("curves.csv");
  write_text(path, format_curves_csv(pts));
  const auto back = load_curves_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].snr_db == 10.0);
  CHECK(back[1].nmse_db == -3.25);
  CHECK(back[1].label == "brt");
  std::filesystem::remove(path);
  CHECK_THROWS(load_curves_csv(path));
}
