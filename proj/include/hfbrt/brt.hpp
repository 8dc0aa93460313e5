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
#include <string>
#include <vector>

#include "hfbrt/common.hpp"
#include "hfbrt/config.hpp"
#include "hfbrt/estimators.hpp"
#include "hfbrt/tensor.hpp"

namespace hfbrt {

// Architecture of the recurrent estimator. Defaults are the full-scale
// narrowband model; token_width must equal 2 S S-bar of the scenario.
struct BRTHyperParams {
  int depth = 3;         // stacked cells per block
  int hidden = 2048;     // embedding width
  int heads = 1;
  int head_dim = 1024;
  int iters = 5;         // recurrent refinement steps
  int state_tokens = 0;  // 0: same as tokens
  int tokens = 1;        // 1 narrowband, K wideband
  int token_width = 2048;
  int mlp_factor = 2;
  bool learned_initial_state = true;
  double ln_eps = 1e-5;
  double beta_init = 0.1;
  double gate_bias_init = 1.0;  // initial s_g, sigma(1) ~ 0.73 retention

  int num_state_tokens() const { return state_tokens > 0 ? state_tokens : tokens; }
  int projection_width() const { return heads * head_dim; }
  bool has_input_projection() const { return hidden != token_width; }
  bool has_positional() const { return tokens > 1; }
  void validate() const;
};

BRTHyperParams hyper_from_kv(const KeyValueConfig& kv, BRTHyperParams base = {});
KeyValueConfig hyper_to_kv(const BRTHyperParams& hp);
const std::vector<std::string>& hyper_keys();
// Narrowband desk-scale model matching toy_scenario().
BRTHyperParams toy_hyper();
// Hyperparameters sized for `scenario` (token width and count), other fields from `base`.
BRTHyperParams hyper_for(const ScenarioConfig& scenario, BRTHyperParams base);

// Parameter ids of one cell.
struct CellParams {
  int ln_emb_gain, ln_emb_bias, ln_state_gain, ln_state_bias;
  // Shared keys/values: K_e, V_e from the embeddings, K_b, V_b from the state.
  int key_emb, value_emb, key_state, value_state;
  // Vertical queries: self (emb -> emb) and cross (emb -> state).
  int query_emb_vertical, query_state_vertical;
  // Horizontal queries: self (state -> state) and cross (state -> emb).
  int query_state_horizontal, query_emb_horizontal;
  int vproj_w, vproj_b, vln_gain, vln_bias, vmlp_w1, vmlp_b1, vmlp_w2, vmlp_b2;
  int hproj_w, hproj_b, hln_gain, hln_bias, hmlp_w1, hmlp_b1, hmlp_w2, hmlp_b2;
  int gate1_u, gate1_bias, gate1_logit;
  int gate2_u, gate2_bias, gate2_logit;
  int initial_state;  // -1 when the initial state is fixed at zero
};

// Trainable state of the estimator. The block weights are shared across all
// refinement steps; only the per-step scales beta_t depend on `iters`.
class BRTModel {
 public:
  BRTModel(const BRTHyperParams& hp, std::uint64_t seed);

  const BRTHyperParams& hyper() const { return hp_; }
  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }

  const std::vector<CellParams>& cells() const { return cells_; }
  int input_w() const { return in_w_; }
  int input_b() const { return in_b_; }
  int positional() const { return pos_; }
  int final_ln_gain() const { return fln_g_; }
  int final_ln_bias() const { return fln_b_; }
  int output_w() const { return out_w_; }
  int output_b() const { return out_b_; }
  const std::vector<int>& betas() const { return betas_; }

  Eigen::Index block_param_count() const;
  Eigen::Index param_count() const { return store_.count(); }

  // Rebuilds the model for a new token count, copying all weights;
  // positional embeddings and token-indexed initial states are truncated or
  // zero-extended.
  BRTModel resized(int tokens) const;

  // Fills every parameter (including zero-initialized ones) with seeded
  // Gaussian noise of the given scale; used by tests and benchmarks.
  void randomize(std::uint64_t seed, double stddev = 0.3);

 private:
  BRTModel() = default;
  void build(std::uint64_t seed);

  BRTHyperParams hp_;
  ad::ParamStore store_;
  std::vector<CellParams> cells_;
  int in_w_ = -1, in_b_ = -1, pos_ = -1;
  int fln_g_ = -1, fln_b_ = -1, out_w_ = -1, out_b_ = -1;
  std::vector<int> betas_;
};

// Graph-side building blocks. These define the reference forward pass used
// for training and gradient checks.
namespace brt {

using ad::Graph;
using ad::Var;

// softmax(Q_h K_h^T / sqrt(d)) V_h per head, heads concatenated. No mask.
Var attention(Var queries, Var keys, Var values, int heads);

// z = v U_z + s_z, g = sigmoid(s_g), c' = c * g + z * (1 - g).
Var fixed_gate(Var state, Var input, Var u, Var bias, Var logit);

struct CellOutput {
  Var embeddings;  // T x N_h
  Var state;       // N_s x N_h
};

// Runs both directions of one cell; keys/values are computed once and
// shared. Both directions read the incoming state.
CellOutput cell_forward(Graph& g, const BRTModel& model, int layer, Var embeddings, Var state);
Var cell_vertical(Graph& g, const BRTModel& model, int layer, Var embeddings, Var state);
Var cell_horizontal(Graph& g, const BRTModel& model, int layer, Var embeddings, Var state);

// Initial per-layer states c_0.
std::vector<Var> initial_states(Graph& g, const BRTModel& model);

// One pass through the stacked cells. `estimate` is T x token_width; the
// returned correction has the same shape. `states` is updated in place.
Var block_forward(Graph& g, const BRTModel& model, Var estimate, std::vector<Var>& states);

// h_t = h_{t-1} - beta_t p_t for t = 1..iters; returns h_0 .. h_iters.
std::vector<Var> refine(Graph& g, const BRTModel& model, Var h0);

// Batch-free NMSE loss |h - h_hat|^2 / |h|^2 of the final estimate.
Var nmse_loss(Graph& g, Var estimate, const Mat& truth);

}  // namespace brt

struct RefinementTrace {
  std::vector<Mat> estimates;    // h_0 .. h_{N_t}
  std::vector<Mat> corrections;  // p_1 .. p_{N_t}
  std::vector<double> betas;

  const Mat& final_estimate() const { return estimates.back(); }
};

// Reference (graph) refinement without gradient bookkeeping.
RefinementTrace refine_reference(const BRTModel& model, const Mat& h0);

// Linear initialization followed by refinement; y is K x 2 S N_p and the
// result K x 2 S S-bar, one token per subcarrier.
Mat estimate(const Observation& obs, const LinearInitializer& init, const BRTModel& model);

}  // namespace hfbrt
