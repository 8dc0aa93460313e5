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

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "hfbrt/common.hpp"
#include "hfbrt/config.hpp"

namespace hfbrt {

// Binary dataset layout (little-endian):
//   magic   8 bytes "HFCHDS01"
//   u32     format version (1)
//   u32     K, subcarriers per record
//   u32     number of antenna elements
//   u32     number of complex measurements per subcarrier (S N_p)
//   u64     scenario hash
//   u64     record count
// then per record: f32 SNR in dB, u32 path count, the channel as K x N
// complex float32 pairs (row-major), the measurement as K x S N_p pairs.
struct DatasetHeader {
  std::uint32_t version = 1;
  std::uint32_t subcarriers = 1;
  std::uint32_t num_elements = 0;
  std::uint32_t num_measurements = 0;
  std::uint64_t scenario_hash = 0;
  std::uint64_t count = 0;
};

struct DatasetRecord {
  float snr_db = 0.0f;
  std::uint32_t num_paths = 0;
  CMat h;  // K x N
  CMat y;  // K x S N_p
};

class DatasetWriter {
 public:
  DatasetWriter(const std::string& path, DatasetHeader header);
  ~DatasetWriter();
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  void append(const DatasetRecord& rec);
  // Rewrites the record count in the header and closes the file.
  void close();
  std::uint64_t count() const { return header_.count; }

 private:
  std::ofstream out_;
  DatasetHeader header_;
};

struct Dataset {
  DatasetHeader header;
  std::vector<DatasetRecord> records;
};

Dataset read_dataset(const std::string& path);

// JSON sidecar describing how a dataset was produced.
void write_dataset_sidecar(const std::string& path, const KeyValueConfig& config, const DatasetHeader& header,
                           std::uint64_t seed);

}  // namespace hfbrt
