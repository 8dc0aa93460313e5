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

#include <string>

#include "hfbrt/brt.hpp"
#include "hfbrt/config.hpp"

namespace hfbrt {

// Binary checkpoint layout (all integers little-endian):
//   magic      8 bytes  "HFBRTCK1"
//   u64        length of the JSON header
//   bytes      JSON header: {"format":1, "hyper":{...}, "config":{key: value}}
//   u64        number of parameter tensors
//   per tensor: u32 name length, name bytes, u64 rows, u64 cols
//   blobs      float64 values of each tensor in table order, column-major
struct Checkpoint {
  BRTModel model;
  KeyValueConfig config;  // effective run configuration stored alongside
};

void save_checkpoint(const std::string& path, const BRTModel& model, const KeyValueConfig& config = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hfbrt
