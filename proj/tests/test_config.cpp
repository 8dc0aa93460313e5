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

#include <cstdio>
#include <fstream>

#include "hfbrt/config.hpp"

using namespace hfbrt;

TEST_CASE("parse, serialize and reparse") {
  const auto kv = KeyValueConfig::parse("# comment\n b = 2\na=hello world \n\n");
  CHECK(kv.get_string("a", "") == "hello world");
  CHECK(kv.get_int("b", 0) == 2);
  CHECK(kv.serialize() == "a = hello world\nb = 2\n");
  CHECK(KeyValueConfig::parse(kv.serialize()).serialize() == kv.serialize());
}

TEST_CASE("malformed input is reported with its location") {
  CHECK_THROWS_AS(KeyValueConfig::parse("novalue\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("a=1\na=2\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("=1\n"), ConfigError);
  try {
    KeyValueConfig::parse("a=1\noops\n", "x.cfg");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
  }
}

TEST_CASE("typed accessors reject garbage") {
  auto kv = KeyValueConfig::parse("n = 12x\nd = 1e-3\nb = maybe\n");
  CHECK_THROWS_AS(kv.get_int("n", 0), ConfigError);
  CHECK(kv.get_double("d", 0.0) == 1e-3);
  CHECK_THROWS_AS(kv.get_bool("b", false), ConfigError);
  CHECK(kv.get_int("missing", 7) == 7);
}

TEST_CASE("overrides replace single keys") {
  auto kv = KeyValueConfig::parse("a = 1\nb = 2\n");
  kv.apply_override("b=5");
  kv.apply_override(" c = x ");
  CHECK(kv.get_int("b", 0) == 5);
  CHECK(kv.get_string("c", "") == "x");
  CHECK_THROWS_AS(kv.apply_override("nothing"), ConfigError);
}

TEST_CASE("unknown keys are rejected") {
  const auto kv = KeyValueConfig::parse("n_pilots = 8\nn_pliots = 9\n");
  CHECK_THROWS_AS(kv.check_known(scenario_keys()), ConfigError);
}

TEST_CASE("hash depends only on content") {
  const auto a = KeyValueConfig::parse("x = 1\ny = 2\n");
  const auto b = KeyValueConfig::parse("y = 2\nx = 1\n");
  const auto c = KeyValueConfig::parse("y = 2\nx = 3\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("scenario round trip through key/value form") {
  ScenarioConfig sc = baseline_scenario();
  sc.snr_min_db = 3.5;
  sc.subcarriers = 4;
  sc.bandwidth_hz = 1e10;
  sc.per_sample_combiner = true;
  const ScenarioConfig back = scenario_from_kv(scenario_to_kv(sc));
  CHECK(scenario_to_kv(back).serialize() == scenario_to_kv(sc).serialize());
  CHECK(back.rayleigh() == 20.0);
  CHECK(back.per_sample_combiner);
}

TEST_CASE("baseline values") {
  const ScenarioConfig sc = baseline_scenario();
  CHECK(sc.array.num_subarrays == 4);
  CHECK(sc.array.elems_per_subarray == 256);
  CHECK(sc.n_pilots == 128);
  CHECK(sc.paths_min == 5);
  CHECK(sc.paths_max == 5);
  CHECK(sc.los_distance == 30.0);
  CHECK(sc.rayleigh() == 20.0);
  CHECK(sc.token_width() == 2048);
  CHECK(sc.measurement_width() == 1024);
  ScenarioConfig derived = sc;
  derived.rayleigh_override.reset();
  CHECK(derived.rayleigh() == doctest::Approx(20.164).epsilon(1e-4));
}

TEST_CASE("scenario validation") {
  ScenarioConfig sc = toy_scenario();
  CHECK_NOTHROW(sc.validate());
  sc.snr_min_db = 30;
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  sc = toy_scenario();
  sc.paths_min = 0;
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  sc = toy_scenario();
  sc.nlos_distance_min = 30;
  sc.nlos_distance_max = 20;
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  sc = toy_scenario();
  sc.subcarriers = 4;
  CHECK_THROWS_AS(sc.validate(), ConfigError);  // no bandwidth
}

TEST_CASE("absorption table lookup") {
  MaterialModel m;
  CHECK(m.absorption_at(2.0e11) == 0.0033);  // single entry: constant
  m.absorption_table = {{1.0e11, 0.0}, {3.0e11, 0.02}};
  CHECK(m.absorption_at(2.0e11) == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(m.absorption_at(1.0e11) == 0.0);
  CHECK(m.absorption_at(3.0e11) == 0.02);
  CHECK_THROWS_AS(m.absorption_at(3.5e11), ConfigError);
  m.absorption_table = {{1.0e11, -1.0}};
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("absorption CSV") {
  const std::string path = "test_absorption.csv";
  {
    std::ofstream out(path);
    out << "frequency_hz,k_abs_per_m\n2.9e11,0.001\n3.1e11,0.003\n";
  }
  const auto table = load_absorption_csv(path);
  REQUIRE(table.size() == 2);
  CHECK(table[1].first == 3.1e11);
  CHECK(table[1].second == 0.003);
  {
    std::ofstream out(path);
    out << "f,k\n1,2\n";
  }
  CHECK_THROWS_AS(load_absorption_csv(path), ConfigError);
  std::remove(path.c_str());
}
