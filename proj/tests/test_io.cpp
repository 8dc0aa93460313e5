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
#include <fstream>

#include <nlohmann/json.hpp>

#include "hfbrt/checkpoint.hpp"
#include "hfbrt/dataset.hpp"

using namespace hfbrt;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("hfbrt_test_" + name)).string();
}

CMat random_cmat(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> g;
  CMat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = {g(rng), g(rng)};
  return m;
}

}  // namespace

TEST_CASE("checkpoint round trip") {
  BRTHyperParams hp = toy_hyper();
  hp.tokens = 3;
  hp.state_tokens = 2;
  hp.iters = 4;
  BRTModel m(hp, 1);
  m.randomize(2);
  KeyValueConfig cfg;
  cfg.set("seed", "7");
  const std::string path = temp_path("roundtrip.ckpt");
  save_checkpoint(path, m, cfg);
  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.config.get_int("seed", 0) == 7);
  CHECK(ck.model.hyper().tokens == 3);
  CHECK(ck.model.hyper().state_tokens == 2);
  CHECK(ck.model.hyper().iters == 4);
  REQUIRE(ck.model.params().size() == m.params().size());
  for (int id = 0; id < m.params().size(); ++id) {
    CHECK(ck.model.params().name(id) == m.params().name(id));
    CHECK(ck.model.params().value(id) == m.params().value(id));
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint errors") {
  const std::string path = temp_path("bad.ckpt");
  CHECK_THROWS_AS(load_checkpoint(path + ".missing"), ConfigError);
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
  BRTModel m(toy_hyper(), 1);
  save_checkpoint(path, m);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 16);
  CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(save_checkpoint("/nonexistent_dir/x.ckpt", m), ConfigError);
}

TEST_CASE("dataset round trip") {
  const std::string path = temp_path("data.bin");
  DatasetHeader h;
  h.subcarriers = 2;
  h.num_elements = 4;
  h.num_measurements = 3;
  h.scenario_hash = 0x1234;
  Rng rng(5);
  std::vector<DatasetRecord> recs;
  {
    DatasetWriter w(path, h);
    for (int i = 0; i < 3; ++i) {
      DatasetRecord r;
      r.snr_db = 2.5f * i;
      r.num_paths = 2 + i;
      r.h = random_cmat(2, 4, rng);
      r.y = random_cmat(2, 3, rng);
      w.append(r);
      recs.push_back(r);
    }
    DatasetRecord bad;
    bad.h = random_cmat(2, 5, rng);
    bad.y = random_cmat(2, 3, rng);
    CHECK_THROWS_AS(w.append(bad), ShapeError);
    w.close();
    CHECK(w.count() == 3);
  }
  const Dataset ds = read_dataset(path);
  CHECK(ds.header.count == 3);
  CHECK(ds.header.scenario_hash == 0x1234);
  REQUIRE(ds.records.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(ds.records[i].snr_db == recs[i].snr_db);
    CHECK(ds.records[i].num_paths == recs[i].num_paths);
    CHECK(ds.records[i].h == recs[i].h.cast<std::complex<float>>().cast<cdouble>());
    CHECK(ds.records[i].y == recs[i].y.cast<std::complex<float>>().cast<cdouble>());
  }

  KeyValueConfig cfg;
  cfg.set("n_pilots", "8");
  write_dataset_sidecar(path + ".json", cfg, ds.header, 11);
  std::ifstream in(path + ".json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j.contains("seed"));
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
}

TEST_CASE("dataset errors") {
  const std::string path = temp_path("bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "garbage!";
  }
  CHECK_THROWS_AS(read_dataset(path), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_dataset(path), ConfigError);
}
