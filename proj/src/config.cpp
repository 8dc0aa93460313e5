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

#include "hfbrt/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hfbrt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.has(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.values_[key] = value;
  }
  return kv;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

void KeyValueConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty())
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + it->second + "' is not a number");
  }
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long long v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("key '" + key + "': '" + s + "' is not an integer");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& s = it->second;
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("key '" + key + "': '" + s + "' is not a boolean");
}

void KeyValueConfig::check_known(const std::vector<std::string>& known) const {
  for (const auto& [k, v] : values_) {
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError("unknown config key '" + k + "'");
  }
}

std::string KeyValueConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t KeyValueConfig::hash() const { return fnv1a64(serialize()); }

void KeyValueConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << serialize();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double MaterialModel::absorption_at(double freq_hz) const {
  if (absorption_table.size() == 1) return absorption_table.front().second;
  const auto& t = absorption_table;
  if (freq_hz < t.front().first || freq_hz > t.back().first) {
    throw ConfigError("frequency " + format_double(freq_hz) +
                      " Hz is outside the absorption table range [" + format_double(t.front().first) +
                      ", " + format_double(t.back().first) + "] Hz");
  }
  auto hi = std::lower_bound(t.begin(), t.end(), freq_hz,
                             [](const auto& row, double f) { return row.first < f; });
  if (hi->first == freq_hz) return hi->second;
  auto lo = hi - 1;
  const double w = (freq_hz - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

void MaterialModel::validate() const {
  if (absorption_table.empty()) throw ConfigError("absorption table is empty");
  for (std::size_t i = 0; i < absorption_table.size(); ++i) {
    if (!(absorption_table[i].second >= 0.0)) throw ConfigError("absorption coefficient must be >= 0");
    if (i > 0 && !(absorption_table[i].first > absorption_table[i - 1].first))
      throw ConfigError("absorption table frequencies must be strictly increasing");
  }
  if (!(roughness >= 0.0)) throw ConfigError("roughness must be >= 0");
}

std::vector<std::pair<double, double>> load_absorption_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open absorption table '" + path + "'");
  std::vector<std::pair<double, double>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line != "frequency_hz,k_abs_per_m")
        throw ConfigError(path + ": expected header 'frequency_hz,k_abs_per_m'");
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError(path + ": malformed row '" + line + "'");
    try {
      rows.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ConfigError(path + ": malformed row '" + line + "'");
    }
  }
  MaterialModel probe;
  probe.absorption_table = rows;
  probe.validate();
  return rows;
}

double ScenarioConfig::rayleigh() const {
  if (rayleigh_override) return *rayleigh_override;
  return rayleigh_distance(aperture(array), array.wavelength());
}

void ScenarioConfig::validate() const {
  array.validate();
  material.validate();
  if (n_pilots < 1) throw ConfigError("n_pilots must be >= 1");
  if (paths_min < 1 || paths_max < paths_min) throw ConfigError("path count range must satisfy 1 <= min <= max");
  if (!(los_distance > 0.0)) throw ConfigError("los_distance must be positive");
  if (!(nlos_distance_min > 0.0) || !(nlos_distance_max >= nlos_distance_min))
    throw ConfigError("NLoS distance range is empty or non-positive");
  if (!(nlos_delay_max >= nlos_delay_min)) throw ConfigError("NLoS delay range is empty");
  if (!(snr_max_db >= snr_min_db)) throw ConfigError("snr range must satisfy min <= max");
  if (subcarriers < 1) throw ConfigError("subcarriers must be >= 1");
  if (subcarriers > 1 && !(bandwidth_hz > 0.0)) throw ConfigError("bandwidth_hz must be positive for K > 1");
  if (rayleigh_override && !(*rayleigh_override > 0.0)) throw ConfigError("rayleigh_distance_m must be positive");
}

const std::vector<std::string>& scenario_keys() {
  static const std::vector<std::string> keys = {
      "num_subarrays", "elems_per_subarray", "sa_spacing_m", "ae_spacing_m", "carrier_hz",
      "n_pilots", "paths_min", "paths_max", "los_distance_m", "los_delay_s",
      "nlos_distance_min_m", "nlos_distance_max_m", "nlos_delay_min_s", "nlos_delay_max_s",
      "absorption_per_m", "absorption_table", "refractive_index_re", "refractive_index_im",
      "roughness_m", "rayleigh_distance_m", "snr_min_db", "snr_max_db", "subcarriers",
      "bandwidth_hz", "combiner_seed", "combiner_mode"};
  return keys;
}

ScenarioConfig scenario_from_kv(const KeyValueConfig& kv) {
  ScenarioConfig sc;
  sc.array.num_subarrays = static_cast<int>(kv.get_int("num_subarrays", sc.array.num_subarrays));
  sc.array.elems_per_subarray = static_cast<int>(kv.get_int("elems_per_subarray", sc.array.elems_per_subarray));
  sc.array.sa_spacing = kv.get_double("sa_spacing_m", sc.array.sa_spacing);
  sc.array.ae_spacing = kv.get_double("ae_spacing_m", sc.array.ae_spacing);
  sc.array.carrier_hz = kv.get_double("carrier_hz", sc.array.carrier_hz);
  sc.n_pilots = static_cast<int>(kv.get_int("n_pilots", sc.n_pilots));
  sc.paths_min = static_cast<int>(kv.get_int("paths_min", sc.paths_min));
  sc.paths_max = static_cast<int>(kv.get_int("paths_max", std::max<long long>(sc.paths_min, sc.paths_max)));
  if (kv.has("paths_min") && !kv.has("paths_max")) sc.paths_max = sc.paths_min;
  sc.los_distance = kv.get_double("los_distance_m", sc.los_distance);
  sc.los_delay = kv.get_double("los_delay_s", sc.los_delay);
  sc.nlos_distance_min = kv.get_double("nlos_distance_min_m", sc.nlos_distance_min);
  sc.nlos_distance_max = kv.get_double("nlos_distance_max_m", sc.nlos_distance_max);
  sc.nlos_delay_min = kv.get_double("nlos_delay_min_s", sc.nlos_delay_min);
  sc.nlos_delay_max = kv.get_double("nlos_delay_max_s", sc.nlos_delay_max);
  if (kv.has("absorption_per_m"))
    sc.material.absorption_table = {{sc.array.carrier_hz, kv.get_double("absorption_per_m", 0.0)}};
  sc.absorption_table_path = kv.get_string("absorption_table", "");
  if (!sc.absorption_table_path.empty()) sc.material.absorption_table = load_absorption_csv(sc.absorption_table_path);
  sc.material.refractive_index = {kv.get_double("refractive_index_re", sc.material.refractive_index.real()),
                                  kv.get_double("refractive_index_im", sc.material.refractive_index.imag())};
  sc.material.roughness = kv.get_double("roughness_m", sc.material.roughness);
  if (kv.has("rayleigh_distance_m")) sc.rayleigh_override = kv.get_double("rayleigh_distance_m", 0.0);
  sc.snr_min_db = kv.get_double("snr_min_db", sc.snr_min_db);
  sc.snr_max_db = kv.get_double("snr_max_db", sc.snr_max_db);
  sc.subcarriers = static_cast<int>(kv.get_int("subcarriers", sc.subcarriers));
  sc.bandwidth_hz = kv.get_double("bandwidth_hz", sc.bandwidth_hz);
  sc.combiner_seed = static_cast<std::uint64_t>(kv.get_int("combiner_seed", static_cast<long long>(sc.combiner_seed)));
  const std::string mode = kv.get_string("combiner_mode", "fixed");
  if (mode != "fixed" && mode != "per_sample")
    throw ConfigError("combiner_mode must be 'fixed' or 'per_sample', got '" + mode + "'");
  sc.per_sample_combiner = mode == "per_sample";
  sc.validate();
  return sc;
}

KeyValueConfig scenario_to_kv(const ScenarioConfig& sc) {
  KeyValueConfig kv;
  kv.set("num_subarrays", std::to_string(sc.array.num_subarrays));
  kv.set("elems_per_subarray", std::to_string(sc.array.elems_per_subarray));
  kv.set("sa_spacing_m", format_double(sc.array.sa_spacing));
  kv.set("ae_spacing_m", format_double(sc.array.ae_spacing));
  kv.set("carrier_hz", format_double(sc.array.carrier_hz));
  kv.set("n_pilots", std::to_string(sc.n_pilots));
  kv.set("paths_min", std::to_string(sc.paths_min));
  kv.set("paths_max", std::to_string(sc.paths_max));
  kv.set("los_distance_m", format_double(sc.los_distance));
  kv.set("los_delay_s", format_double(sc.los_delay));
  kv.set("nlos_distance_min_m", format_double(sc.nlos_distance_min));
  kv.set("nlos_distance_max_m", format_double(sc.nlos_distance_max));
  kv.set("nlos_delay_min_s", format_double(sc.nlos_delay_min));
  kv.set("nlos_delay_max_s", format_double(sc.nlos_delay_max));
  if (!sc.absorption_table_path.empty()) {
    kv.set("absorption_table", sc.absorption_table_path);
  } else if (sc.material.absorption_table.size() == 1) {
    kv.set("absorption_per_m", format_double(sc.material.absorption_table.front().second));
  } else {
    throw ConfigError("an in-memory absorption table cannot be serialized; set absorption_table to a CSV path");
  }
  kv.set("refractive_index_re", format_double(sc.material.refractive_index.real()));
  kv.set("refractive_index_im", format_double(sc.material.refractive_index.imag()));
  kv.set("roughness_m", format_double(sc.material.roughness));
  if (sc.rayleigh_override) kv.set("rayleigh_distance_m", format_double(*sc.rayleigh_override));
  kv.set("snr_min_db", format_double(sc.snr_min_db));
  kv.set("snr_max_db", format_double(sc.snr_max_db));
  kv.set("subcarriers", std::to_string(sc.subcarriers));
  kv.set("bandwidth_hz", format_double(sc.bandwidth_hz));
  kv.set("combiner_seed", std::to_string(sc.combiner_seed));
  kv.set("combiner_mode", sc.per_sample_combiner ? "per_sample" : "fixed");
  return kv;
}

ScenarioConfig baseline_scenario() {
  ScenarioConfig sc;
  sc.rayleigh_override = 20.0;
  return sc;
}

ScenarioConfig toy_scenario() {
  ScenarioConfig sc;
  sc.array.num_subarrays = 1;
  sc.array.elems_per_subarray = 16;
  sc.n_pilots = 8;
  sc.paths_min = sc.paths_max = 2;
  return sc;
}

}  // namespace hfbrt
