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

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hfbrt/common.hpp"
#include "hfbrt/geometry.hpp"

namespace hfbrt {

// Flat "key = value" text configuration. Lines starting with '#' are
// comments; blank lines are ignored; keys are unique.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);
  // Applies "key=value" overrides; throws ConfigError on malformed input.
  void apply_override(const std::string& assignment);
  void merge(const KeyValueConfig& other);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Throws ConfigError naming the first key not present in `known`.
  void check_known(const std::vector<std::string>& known) const;

  // Canonical form: keys sorted, one "key = value" per line.
  std::string serialize() const;
  std::uint64_t hash() const;
  void save(const std::string& path) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);
// Formats a double so that parsing it back yields the same value.
std::string format_double(double v);

// Frequency-dependent molecular absorption. A single-entry table is a
// frequency-independent coefficient; otherwise piecewise-linear
// interpolation inside the tabulated range.
struct MaterialModel {
  std::vector<std::pair<double, double>> absorption_table{{3.0e11, 0.0033}};  // (Hz, 1/m)
  std::complex<double> refractive_index{2.24, -0.025};
  double roughness = 8.8e-5;  // m

  // Throws ConfigError outside the tabulated range.
  double absorption_at(double freq_hz) const;
  void validate() const;
};

// CSV with header "frequency_hz,k_abs_per_m", rows sorted by frequency.
std::vector<std::pair<double, double>> load_absorption_csv(const std::string& path);

// Complete description of a channel-estimation scenario.
struct ScenarioConfig {
  ArrayConfig array;
  int n_pilots = 128;

  // Number of paths per realization, uniform over [paths_min, paths_max].
  int paths_min = 5;
  int paths_max = 5;

  double los_distance = 30.0;   // m
  double los_delay = 100e-9;    // s
  double nlos_distance_min = 10.0;
  double nlos_distance_max = 25.0;
  double nlos_delay_min = 100e-9;
  double nlos_delay_max = 110e-9;

  MaterialModel material;
  std::string absorption_table_path;  // empty: use material.absorption_table as is

  // Near/far threshold override; the derived 2 D^2 / lambda is used otherwise.
  std::optional<double> rayleigh_override;

  double snr_min_db = 0.0;
  double snr_max_db = 20.0;

  int subcarriers = 1;       // K; 1 is narrowband
  double bandwidth_hz = 0.0;  // B, ignored when K == 1

  std::uint64_t combiner_seed = 1;
  bool per_sample_combiner = false;

  double rayleigh() const;
  int num_elements() const { return array.num_elements(); }
  int token_width() const { return 2 * array.num_elements(); }
  int measurement_width() const { return 2 * array.num_subarrays * n_pilots; }
  void validate() const;
};

ScenarioConfig scenario_from_kv(const KeyValueConfig& kv);
KeyValueConfig scenario_to_kv(const ScenarioConfig& sc);
const std::vector<std::string>& scenario_keys();

// Table I baseline and the desk-scale toy scenario.
ScenarioConfig baseline_scenario();
ScenarioConfig toy_scenario();

}  // namespace hfbrt
