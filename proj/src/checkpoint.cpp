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

#include "hfbrt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace hfbrt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'H', 'F', 'B', 'R', 'T', 'C', 'K', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ConfigError("checkpoint is truncated");
  return v;
}

nlohmann::json hyper_json(const BRTHyperParams& hp) {
  return {{"depth", hp.depth},
          {"hidden", hp.hidden},
          {"heads", hp.heads},
          {"head_dim", hp.head_dim},
          {"iters", hp.iters},
          {"state_tokens", hp.state_tokens},
          {"tokens", hp.tokens},
          {"token_width", hp.token_width},
          {"mlp_factor", hp.mlp_factor},
          {"learned_initial_state", hp.learned_initial_state},
          {"ln_eps", hp.ln_eps},
          {"beta_init", hp.beta_init},
          {"gate_bias_init", hp.gate_bias_init}};
}

BRTHyperParams hyper_of(const nlohmann::json& j) {
  BRTHyperParams hp;
  hp.depth = j.at("depth");
  hp.hidden = j.at("hidden");
  hp.heads = j.at("heads");
  hp.head_dim = j.at("head_dim");
  hp.iters = j.at("iters");
  hp.state_tokens = j.at("state_tokens");
  hp.tokens = j.at("tokens");
  hp.token_width = j.at("token_width");
  hp.mlp_factor = j.at("mlp_factor");
  hp.learned_initial_state = j.at("learned_initial_state");
  hp.ln_eps = j.at("ln_eps");
  hp.beta_init = j.at("beta_init");
  hp.gate_bias_init = j.at("gate_bias_init");
  return hp;
}

}  // namespace

void save_checkpoint(const std::string& path, const BRTModel& model, const KeyValueConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  nlohmann::json header = {{"format", 1}, {"hyper", hyper_json(model.hyper())}, {"config", config.entries()}};
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto& store = model.params();
  put<std::uint64_t>(out, static_cast<std::uint64_t>(store.size()));
  for (int id = 0; id < store.size(); ++id) {
    const std::string& name = store.name(id);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(store.value(id).rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(store.value(id).cols()));
  }
  for (int id = 0; id < store.size(); ++id) {
    const Mat& m = store.value(id);
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!out) throw ConfigError("failed while writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ConfigError("'" + path + "' is not a checkpoint");
  const auto len = get<std::uint64_t>(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ConfigError("checkpoint header is truncated");
  const nlohmann::json header = nlohmann::json::parse(text);
  if (header.at("format") != 1) throw ConfigError("unsupported checkpoint format");

  Checkpoint ck{BRTModel(hyper_of(header.at("hyper")), 0), {}};
  for (const auto& [k, v] : header.at("config").items()) ck.config.set(k, v.get<std::string>());

  auto& store = ck.model.params();
  const auto count = get<std::uint64_t>(in);
  if (count != static_cast<std::uint64_t>(store.size()))
    throw ConfigError("checkpoint tensor count does not match its hyperparameters");
  std::vector<int> order;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto n = get<std::uint32_t>(in);
    std::string name(n, '\0');
    in.read(name.data(), n);
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    const int id = store.id(name);
    if (static_cast<std::uint64_t>(store.value(id).rows()) != rows ||
        static_cast<std::uint64_t>(store.value(id).cols()) != cols)
      throw ConfigError("checkpoint tensor '" + name + "' has an unexpected shape");
    order.push_back(id);
  }
  for (int id : order) {
    Mat& m = store.value(id);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw ConfigError("checkpoint data is truncated");
  }
  return ck;
}

}  // namespace hfbrt
