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

#include "hfbrt/brt.hpp"

#include <cmath>
#include <string>

namespace hfbrt {

void BRTHyperParams::validate() const {
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (heads < 1 || head_dim < 1) throw ConfigError("heads and head_dim must be >= 1");
  if (projection_width() > 4 * hidden)
    throw ConfigError("heads * head_dim must not exceed 4 * hidden");
  if (iters < 1) throw ConfigError("iters must be >= 1");
  if (tokens < 1) throw ConfigError("tokens must be >= 1");
  if (state_tokens < 0) throw ConfigError("state_tokens must be >= 0");
  if (token_width < 2 || token_width % 2 != 0) throw ConfigError("token_width must be a positive even number");
  if (mlp_factor < 1) throw ConfigError("mlp_factor must be >= 1");
}

const std::vector<std::string>& hyper_keys() {
  static const std::vector<std::string> keys = {"depth", "hidden", "heads", "head_dim", "iters",
                                                "state_tokens", "mlp_factor", "learned_initial_state"};
  return keys;
}

BRTHyperParams hyper_from_kv(const KeyValueConfig& kv, BRTHyperParams hp) {
  hp.depth = static_cast<int>(kv.get_int("depth", hp.depth));
  hp.hidden = static_cast<int>(kv.get_int("hidden", hp.hidden));
  hp.heads = static_cast<int>(kv.get_int("heads", hp.heads));
  hp.head_dim = static_cast<int>(kv.get_int("head_dim", hp.head_dim));
  hp.iters = static_cast<int>(kv.get_int("iters", hp.iters));
  hp.state_tokens = static_cast<int>(kv.get_int("state_tokens", hp.state_tokens));
  hp.mlp_factor = static_cast<int>(kv.get_int("mlp_factor", hp.mlp_factor));
  hp.learned_initial_state = kv.get_bool("learned_initial_state", hp.learned_initial_state);
  return hp;
}

KeyValueConfig hyper_to_kv(const BRTHyperParams& hp) {
  KeyValueConfig kv;
  kv.set("depth", std::to_string(hp.depth));
  kv.set("hidden", std::to_string(hp.hidden));
  kv.set("heads", std::to_string(hp.heads));
  kv.set("head_dim", std::to_string(hp.head_dim));
  kv.set("iters", std::to_string(hp.iters));
  kv.set("state_tokens", std::to_string(hp.state_tokens));
  kv.set("mlp_factor", std::to_string(hp.mlp_factor));
  kv.set("learned_initial_state", hp.learned_initial_state ? "true" : "false");
  return kv;
}

BRTHyperParams toy_hyper() {
  BRTHyperParams hp;
  hp.depth = 2;
  hp.hidden = 32;
  hp.heads = 1;
  hp.head_dim = 16;
  hp.iters = 2;
  hp.token_width = 32;
  return hp;
}

BRTHyperParams hyper_for(const ScenarioConfig& scenario, BRTHyperParams base) {
  base.token_width = scenario.token_width();
  base.tokens = scenario.subcarriers;
  return base;
}

BRTModel::BRTModel(const BRTHyperParams& hp, std::uint64_t seed) : hp_(hp) {
  hp_.validate();
  build(seed);
}

void BRTModel::build(std::uint64_t seed) {
  Rng rng = make_stream(seed, 0xB27);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto dense = [&](int in, int out) {
    Mat m(in, out);
    const double sd = 1.0 / std::sqrt(static_cast<double>(in));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = sd * gauss(rng);
    return m;
  };
  auto row = [](int n, double v) { return Mat::Constant(1, n, v); };

  const int H = hp_.hidden, P = hp_.projection_width(), F = hp_.mlp_factor * H;
  const int T = hp_.tokens, Ns = hp_.num_state_tokens(), D = hp_.token_width;

  if (hp_.has_input_projection()) {
    in_w_ = store_.add("input.w", dense(D, H));
    in_b_ = store_.add("input.b", row(H, 0.0));
  }
  if (hp_.has_positional()) pos_ = store_.add("input.positional", Mat::Zero(T, H));

  for (int l = 0; l < hp_.depth; ++l) {
    const std::string p = "cell" + std::to_string(l) + ".";
    CellParams c{};
    c.ln_emb_gain = store_.add(p + "ln_emb.gain", row(H, 1.0));
    c.ln_emb_bias = store_.add(p + "ln_emb.bias", row(H, 0.0));
    c.ln_state_gain = store_.add(p + "ln_state.gain", row(H, 1.0));
    c.ln_state_bias = store_.add(p + "ln_state.bias", row(H, 0.0));
    c.key_emb = store_.add(p + "key_emb", dense(H, P));
    c.value_emb = store_.add(p + "value_emb", dense(H, P));
    c.key_state = store_.add(p + "key_state", dense(H, P));
    c.value_state = store_.add(p + "value_state", dense(H, P));
    c.query_emb_vertical = store_.add(p + "query_emb_vertical", dense(H, P));
    c.query_state_vertical = store_.add(p + "query_state_vertical", dense(H, P));
    c.query_state_horizontal = store_.add(p + "query_state_horizontal", dense(H, P));
    c.query_emb_horizontal = store_.add(p + "query_emb_horizontal", dense(H, P));
    c.vproj_w = store_.add(p + "vertical.proj.w", dense(2 * P, H));
    c.vproj_b = store_.add(p + "vertical.proj.b", row(H, 0.0));
    c.vln_gain = store_.add(p + "vertical.ln.gain", row(H, 1.0));
    c.vln_bias = store_.add(p + "vertical.ln.bias", row(H, 0.0));
    c.vmlp_w1 = store_.add(p + "vertical.mlp.w1", dense(H, F));
    c.vmlp_b1 = store_.add(p + "vertical.mlp.b1", row(F, 0.0));
    c.vmlp_w2 = store_.add(p + "vertical.mlp.w2", dense(F, H));
    c.vmlp_b2 = store_.add(p + "vertical.mlp.b2", row(H, 0.0));
    c.hproj_w = store_.add(p + "horizontal.proj.w", dense(2 * P, H));
    c.hproj_b = store_.add(p + "horizontal.proj.b", row(H, 0.0));
    c.hln_gain = store_.add(p + "horizontal.ln.gain", row(H, 1.0));
    c.hln_bias = store_.add(p + "horizontal.ln.bias", row(H, 0.0));
    c.hmlp_w1 = store_.add(p + "horizontal.mlp.w1", dense(H, F));
    c.hmlp_b1 = store_.add(p + "horizontal.mlp.b1", row(F, 0.0));
    c.hmlp_w2 = store_.add(p + "horizontal.mlp.w2", dense(F, H));
    c.hmlp_b2 = store_.add(p + "horizontal.mlp.b2", row(H, 0.0));
    c.gate1_u = store_.add(p + "gate1.u", dense(H, H));
    c.gate1_bias = store_.add(p + "gate1.bias", row(H, 0.0));
    c.gate1_logit = store_.add(p + "gate1.logit", row(H, hp_.gate_bias_init));
    c.gate2_u = store_.add(p + "gate2.u", dense(H, H));
    c.gate2_bias = store_.add(p + "gate2.bias", row(H, 0.0));
    c.gate2_logit = store_.add(p + "gate2.logit", row(H, hp_.gate_bias_init));
    if (hp_.learned_initial_state) {
      Mat c0(Ns, H);
      for (Eigen::Index j = 0; j < c0.cols(); ++j)
        for (Eigen::Index i = 0; i < c0.rows(); ++i) c0(i, j) = gauss(rng);
      c.initial_state = store_.add(p + "initial_state", std::move(c0));
    } else {
      c.initial_state = -1;
    }
    cells_.push_back(c);
  }

  fln_g_ = store_.add("output.ln.gain", row(H, 1.0));
  fln_b_ = store_.add("output.ln.bias", row(H, 0.0));
  // Zero head: an untrained model reproduces the linear initializer.
  out_w_ = store_.add("output.w", Mat::Zero(H, D));
  out_b_ = store_.add("output.b", row(D, 0.0));

  for (int t = 0; t < hp_.iters; ++t)
    betas_.push_back(store_.add("beta." + std::to_string(t + 1), Mat::Constant(1, 1, hp_.beta_init)));
}

Eigen::Index BRTModel::block_param_count() const {
  return store_.count() - static_cast<Eigen::Index>(betas_.size());
}

BRTModel BRTModel::resized(int tokens) const {
  BRTHyperParams hp = hp_;
  hp.tokens = tokens;
  BRTModel out(hp, 0);
  for (int id = 0; id < out.store_.size(); ++id) {
    const std::string& name = out.store_.name(id);
    if (!store_.has(name)) continue;
    const Mat& src = store_.value(store_.id(name));
    Mat& dst = out.store_.value(id);
    if (src.cols() != dst.cols()) throw ShapeError("resized: incompatible parameter '" + name + "'");
    if (src.rows() == dst.rows()) {
      dst = src;
    } else {
      dst.setZero();
      const Eigen::Index n = std::min(src.rows(), dst.rows());
      dst.topRows(n) = src.topRows(n);
    }
  }
  return out;
}

void BRTModel::randomize(std::uint64_t seed, double stddev) {
  Rng rng = make_stream(seed, 0xA11);
  std::normal_distribution<double> gauss(0.0, stddev);
  for (int id = 0; id < store_.size(); ++id) {
    Mat& m = store_.value(id);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = gauss(rng);
  }
}

namespace brt {

Var attention(Var queries, Var keys, Var values, int heads) {
  if (heads < 1) throw ShapeError("attention: heads must be >= 1");
  const Eigen::Index width = queries.cols();
  if (keys.cols() != width || values.cols() != width || width % heads != 0)
    throw ShapeError("attention: query/key/value widths must match and split evenly into heads");
  if (keys.rows() != values.rows()) throw ShapeError("attention: keys and values need the same token count");
  const Eigen::Index d = width / heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    Var q = heads == 1 ? queries : ad::slice_cols(queries, h * d, d);
    Var k = heads == 1 ? keys : ad::slice_cols(keys, h * d, d);
    Var v = heads == 1 ? values : ad::slice_cols(values, h * d, d);
    Var weights = ad::softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_d));
    outs.push_back(ad::matmul(weights, v));
  }
  return heads == 1 ? outs.front() : ad::concat_cols(outs);
}

Var fixed_gate(Var state, Var input, Var u, Var bias, Var logit) {
  Var z = ad::add_row(ad::matmul(input, u), bias);
  Var g = ad::sigmoid(logit);
  return ad::add(ad::mul_row(state, g), ad::mul_row(z, ad::one_minus(g)));
}

namespace {

struct Shared {
  Var emb_norm, state_norm, key_emb, value_emb, key_state, value_state;
};

Var P(Graph& g, const BRTModel& m, int id) { return g.param(m.params(), id); }

Shared shared_projections(Graph& g, const BRTModel& m, const CellParams& c, Var emb, Var state) {
  const double eps = m.hyper().ln_eps;
  Shared s;
  s.emb_norm = ad::layer_norm(emb, P(g, m, c.ln_emb_gain), P(g, m, c.ln_emb_bias), eps);
  s.state_norm = ad::layer_norm(state, P(g, m, c.ln_state_gain), P(g, m, c.ln_state_bias), eps);
  s.key_emb = ad::matmul(s.emb_norm, P(g, m, c.key_emb));
  s.value_emb = ad::matmul(s.emb_norm, P(g, m, c.value_emb));
  s.key_state = ad::matmul(s.state_norm, P(g, m, c.key_state));
  s.value_state = ad::matmul(s.state_norm, P(g, m, c.value_state));
  return s;
}

Var mlp(Graph& g, const BRTModel& m, Var x, int w1, int b1, int w2, int b2) {
  Var h = ad::gelu(ad::add_row(ad::matmul(x, P(g, m, w1)), P(g, m, b1)));
  return ad::add_row(ad::matmul(h, P(g, m, w2)), P(g, m, b2));
}

Var vertical(Graph& g, const BRTModel& m, const CellParams& c, const Shared& s, Var emb) {
  const int heads = m.hyper().heads;
  Var self_attn = attention(ad::matmul(s.emb_norm, P(g, m, c.query_emb_vertical)), s.key_emb, s.value_emb, heads);
  Var cross_attn =
      attention(ad::matmul(s.emb_norm, P(g, m, c.query_state_vertical)), s.key_state, s.value_state, heads);
  Var proj = ad::add_row(ad::matmul(ad::concat_cols({self_attn, cross_attn}), P(g, m, c.vproj_w)),
                         P(g, m, c.vproj_b));
  Var e1 = ad::add(emb, proj);
  Var normed = ad::layer_norm(e1, P(g, m, c.vln_gain), P(g, m, c.vln_bias), m.hyper().ln_eps);
  return ad::add(e1, mlp(g, m, normed, c.vmlp_w1, c.vmlp_b1, c.vmlp_w2, c.vmlp_b2));
}

Var horizontal(Graph& g, const BRTModel& m, const CellParams& c, const Shared& s, Var state) {
  const int heads = m.hyper().heads;
  Var self_attn =
      attention(ad::matmul(s.state_norm, P(g, m, c.query_state_horizontal)), s.key_state, s.value_state, heads);
  Var cross_attn =
      attention(ad::matmul(s.state_norm, P(g, m, c.query_emb_horizontal)), s.key_emb, s.value_emb, heads);
  Var proj = ad::add_row(ad::matmul(ad::concat_cols({self_attn, cross_attn}), P(g, m, c.hproj_w)),
                         P(g, m, c.hproj_b));
  Var c1 = fixed_gate(state, proj, P(g, m, c.gate1_u), P(g, m, c.gate1_bias), P(g, m, c.gate1_logit));
  Var normed = ad::layer_norm(c1, P(g, m, c.hln_gain), P(g, m, c.hln_bias), m.hyper().ln_eps);
  Var z = mlp(g, m, normed, c.hmlp_w1, c.hmlp_b1, c.hmlp_w2, c.hmlp_b2);
  return fixed_gate(c1, z, P(g, m, c.gate2_u), P(g, m, c.gate2_bias), P(g, m, c.gate2_logit));
}

void check_cell_inputs(const BRTModel& m, int layer, Var emb, Var state) {
  if (layer < 0 || layer >= m.hyper().depth) throw std::out_of_range("cell layer index");
  if (emb.cols() != m.hyper().hidden || state.cols() != m.hyper().hidden)
    throw ShapeError("cell inputs must have hidden-width rows");
}

}  // namespace

CellOutput cell_forward(Graph& g, const BRTModel& m, int layer, Var emb, Var state) {
  check_cell_inputs(m, layer, emb, state);
  const CellParams& c = m.cells()[layer];
  const Shared s = shared_projections(g, m, c, emb, state);
  return {vertical(g, m, c, s, emb), horizontal(g, m, c, s, state)};
}

Var cell_vertical(Graph& g, const BRTModel& m, int layer, Var emb, Var state) {
  check_cell_inputs(m, layer, emb, state);
  const CellParams& c = m.cells()[layer];
  return vertical(g, m, c, shared_projections(g, m, c, emb, state), emb);
}

Var cell_horizontal(Graph& g, const BRTModel& m, int layer, Var emb, Var state) {
  check_cell_inputs(m, layer, emb, state);
  const CellParams& c = m.cells()[layer];
  return horizontal(g, m, c, shared_projections(g, m, c, emb, state), state);
}

std::vector<Var> initial_states(Graph& g, const BRTModel& m) {
  std::vector<Var> states;
  for (const auto& c : m.cells()) {
    if (c.initial_state >= 0)
      states.push_back(P(g, m, c.initial_state));
    else
      states.push_back(g.constant(Mat::Zero(m.hyper().num_state_tokens(), m.hyper().hidden)));
  }
  return states;
}

Var block_forward(Graph& g, const BRTModel& m, Var estimate, std::vector<Var>& states) {
  const auto& hp = m.hyper();
  if (static_cast<int>(states.size()) != hp.depth) throw ShapeError("block_forward: one state per layer required");
  if (estimate.cols() != hp.token_width) throw ShapeError("block_forward: token width mismatch");
  if (m.positional() >= 0 && estimate.rows() != hp.tokens)
    throw ShapeError("block_forward: token count does not match the positional table");
  Var x = estimate;
  if (m.input_w() >= 0) x = ad::add_row(ad::matmul(x, P(g, m, m.input_w())), P(g, m, m.input_b()));
  if (m.positional() >= 0) x = ad::add(x, P(g, m, m.positional()));
  for (int l = 0; l < hp.depth; ++l) {
    CellOutput out = cell_forward(g, m, l, x, states[l]);
    x = out.embeddings;
    states[l] = out.state;
  }
  Var top = ad::layer_norm(x, P(g, m, m.final_ln_gain()), P(g, m, m.final_ln_bias()), hp.ln_eps);
  return ad::add_row(ad::matmul(top, P(g, m, m.output_w())), P(g, m, m.output_b()));
}

namespace {

std::vector<Var> refine_impl(Graph& g, const BRTModel& m, Var h0, std::vector<Var>* corrections) {
  std::vector<Var> states = initial_states(g, m);
  std::vector<Var> trace{h0};
  Var h = h0;
  for (int t = 0; t < m.hyper().iters; ++t) {
    Var p = block_forward(g, m, h, states);
    if (corrections) corrections->push_back(p);
    h = ad::sub(h, ad::scale_by(p, P(g, m, m.betas()[t])));
    trace.push_back(h);
  }
  return trace;
}

}  // namespace

std::vector<Var> refine(Graph& g, const BRTModel& m, Var h0) { return refine_impl(g, m, h0, nullptr); }

Var nmse_loss(Graph& g, Var estimate, const Mat& truth) {
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw std::domain_error("nmse: reference channel has zero norm");
  return ad::scale(ad::squared_norm(ad::sub(g.constant(truth), estimate)), 1.0 / denom);
}

}  // namespace brt

RefinementTrace refine_reference(const BRTModel& model, const Mat& h0) {
  ad::Graph g;
  std::vector<ad::Var> corrections;
  auto trace = brt::refine_impl(g, model, g.constant(h0), &corrections);
  RefinementTrace out;
  for (const auto& v : trace) out.estimates.push_back(v.value());
  for (const auto& v : corrections) out.corrections.push_back(v.value());
  for (int id : model.betas()) out.betas.push_back(model.params().value(id)(0, 0));
  return out;
}

Mat estimate(const Observation& obs, const LinearInitializer& init, const BRTModel& model) {
  return refine_reference(model, ls_estimate(obs, init)).final_estimate();
}

}  // namespace hfbrt
