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

#include "hfbrt/dataset.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

namespace hfbrt {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'H', 'F', 'C', 'H', 'D', 'S', '0', '1'};
constexpr std::streamoff kCountOffset = 8 + 4 * 4 + 8;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ConfigError("dataset is truncated");
  return v;
}

void put_complex(std::ostream& out, const CMat& m) {
  std::vector<float> buf;
  buf.reserve(2 * m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      buf.push_back(static_cast<float>(m(r, c).real()));
      buf.push_back(static_cast<float>(m(r, c).imag()));
    }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

CMat get_complex(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  std::vector<float> buf(static_cast<std::size_t>(2 * rows * cols));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw ConfigError("dataset record is truncated");
  CMat m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c, i += 2) m(r, c) = {buf[i], buf[i + 1]};
  return m;
}

}  // namespace

DatasetWriter::DatasetWriter(const std::string& path, DatasetHeader header)
    : out_(path, std::ios::binary | std::ios::trunc), header_(header) {
  if (!out_) throw ConfigError("cannot write dataset '" + path + "'");
  header_.count = 0;
  out_.write(kMagic, sizeof kMagic);
  put(out_, header_.version);
  put(out_, header_.subcarriers);
  put(out_, header_.num_elements);
  put(out_, header_.num_measurements);
  put(out_, header_.scenario_hash);
  put(out_, header_.count);
}

DatasetWriter::~DatasetWriter() {
  try {
    close();
  } catch (...) {
  }
}

void DatasetWriter::append(const DatasetRecord& rec) {
  if (!out_.is_open()) throw std::logic_error("dataset writer is closed");
  if (rec.h.rows() != header_.subcarriers || rec.h.cols() != header_.num_elements)
    throw ShapeError("dataset record channel has the wrong shape");
  if (rec.y.rows() != header_.subcarriers || rec.y.cols() != header_.num_measurements)
    throw ShapeError("dataset record measurement has the wrong shape");
  put(out_, rec.snr_db);
  put(out_, rec.num_paths);
  put_complex(out_, rec.h);
  put_complex(out_, rec.y);
  ++header_.count;
}

void DatasetWriter::close() {
  if (!out_.is_open()) return;
  out_.seekp(kCountOffset);
  put(out_, header_.count);
  out_.close();
  if (out_.fail()) throw ConfigError("failed while writing dataset");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ConfigError("'" + path + "' is not a dataset");
  Dataset ds;
  ds.header.version = get<std::uint32_t>(in);
  if (ds.header.version != 1) throw ConfigError("unsupported dataset version");
  ds.header.subcarriers = get<std::uint32_t>(in);
  ds.header.num_elements = get<std::uint32_t>(in);
  ds.header.num_measurements = get<std::uint32_t>(in);
  ds.header.scenario_hash = get<std::uint64_t>(in);
  ds.header.count = get<std::uint64_t>(in);
  ds.records.reserve(ds.header.count);
  for (std::uint64_t i = 0; i < ds.header.count; ++i) {
    DatasetRecord r;
    r.snr_db = get<float>(in);
    r.num_paths = get<std::uint32_t>(in);
    r.h = get_complex(in, ds.header.subcarriers, ds.header.num_elements);
    r.y = get_complex(in, ds.header.subcarriers, ds.header.num_measurements);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

void write_dataset_sidecar(const std::string& path, const KeyValueConfig& config, const DatasetHeader& header,
                           std::uint64_t seed) {
  nlohmann::json j;
  j["format"] = "HFCHDS01";
  j["version"] = header.version;
  j["subcarriers"] = header.subcarriers;
  j["num_elements"] = header.num_elements;
  j["num_measurements"] = header.num_measurements;
  j["count"] = header.count;
  j["scenario_hash"] = hex64(header.scenario_hash);
  j["seed"] = seed;
  j["combiner_seed"] = config.get_string("combiner_seed", "1");
  j["combiner_mode"] = config.get_string("combiner_mode", "fixed");
  j["snr_policy"] = {{"distribution", "uniform"},
                     {"min_db", config.get_double("snr_min_db", 0.0)},
                     {"max_db", config.get_double("snr_max_db", 20.0)}};
  j["config"] = config.entries();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace hfbrt
