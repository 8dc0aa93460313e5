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

#include <cmath>
#include <vector>

#include "hfbrt/brt.hpp"

// Forward-only batched inference for BRTModel. Token-wise linear layers run
// on all samples' tokens stacked into one matrix; attention runs per sample.
// The same code serves as the serial reference (Exec::Serial) and the
// OpenMP-parallel kernel (Exec::Parallel). Work is split into fixed chunks
// that do not depend on the thread count, so both produce identical bits.
namespace hfbrt::kernels {

enum class Exec { Serial, Parallel };

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr Eigen::Index kRowChunk = 64;

template <typename Scalar>
class BatchedBRT {
 public:
  explicit BatchedBRT(const BRTModel& model) : model_(model) {
    const auto& store = model.params();
    weights_.reserve(store.size());
    for (int id = 0; id < store.size(); ++id) weights_.push_back(store.value(id).template cast<Scalar>());
  }

  const BRTModel& model() const { return model_; }

  // Runs the full refinement for every sample; h0[i] is T x token_width.
  // When `trace` is non-null it receives h_0 .. h_{N_t} per sample.
  std::vector<MatX<Scalar>> refine(const std::vector<Mat>& h0, Exec exec,
                                   std::vector<std::vector<MatX<Scalar>>>* trace = nullptr) const {
    const auto& hp = model_.hyper();
    const int B = static_cast<int>(h0.size());
    if (B == 0) return {};
    const Eigen::Index T = h0.front().rows();
    for (const auto& h : h0)
      if (h.rows() != T || h.cols() != hp.token_width) throw ShapeError("refine: inconsistent sample shapes");
    if (model_.positional() >= 0 && T != hp.tokens) throw ShapeError("refine: token count mismatch");
    const bool par = exec == Exec::Parallel;

    MatX<Scalar> h(B * T, hp.token_width);
    for (int b = 0; b < B; ++b) h.middleRows(b * T, T) = h0[b].template cast<Scalar>();
    if (trace) {
      trace->assign(B, {});
      append_trace(*trace, h, T);
    }

    const Eigen::Index Ns = hp.num_state_tokens();
    std::vector<MatX<Scalar>> states;
    for (const auto& c : model_.cells()) {
      MatX<Scalar> s(B * Ns, hp.hidden);
      for (int b = 0; b < B; ++b) {
        if (c.initial_state >= 0)
          s.middleRows(b * Ns, Ns) = weights_[c.initial_state];
        else
          s.middleRows(b * Ns, Ns).setZero();
      }
      states.push_back(std::move(s));
    }

    for (int t = 0; t < hp.iters; ++t) {
      const MatX<Scalar> p = block(h, states, B, T, par);
      const Scalar beta = weights_[model_.betas()[t]](0, 0);
      h -= beta * p;
      if (trace) append_trace(*trace, h, T);
    }

    std::vector<MatX<Scalar>> out(B);
    for (int b = 0; b < B; ++b) out[b] = h.middleRows(b * T, T);
    return out;
  }

 private:
  static void append_trace(std::vector<std::vector<MatX<Scalar>>>& trace, const MatX<Scalar>& h, Eigen::Index T) {
    for (std::size_t b = 0; b < trace.size(); ++b) trace[b].push_back(h.middleRows(b * T, T));
  }

  const MatX<Scalar>& w(int id) const { return weights_[id]; }

  MatX<Scalar> linear(const MatX<Scalar>& x, int wid, int bid, bool par) const {
    const MatX<Scalar>& W = w(wid);
    MatX<Scalar> out(x.rows(), W.cols());
    const Eigen::Index chunks = (x.rows() + kRowChunk - 1) / kRowChunk;
#pragma omp parallel for schedule(static) if (par)
    for (Eigen::Index c = 0; c < chunks; ++c) {
      const Eigen::Index r0 = c * kRowChunk;
      const Eigen::Index n = std::min(kRowChunk, x.rows() - r0);
      out.middleRows(r0, n).noalias() = x.middleRows(r0, n) * W;
      if (bid >= 0) out.middleRows(r0, n).rowwise() += w(bid).row(0);
    }
    return out;
  }

  MatX<Scalar> layer_norm(const MatX<Scalar>& x, int gid, int bid, bool par) const {
    const Scalar eps = static_cast<Scalar>(model_.hyper().ln_eps);
    const Scalar n = static_cast<Scalar>(x.cols());
    MatX<Scalar> out(x.rows(), x.cols());
#pragma omp parallel for schedule(static) if (par)
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Scalar mean = x.row(r).sum() / n;
      const auto centered = (x.row(r).array() - mean).matrix().eval();
      const Scalar inv_std = Scalar(1) / std::sqrt(centered.squaredNorm() / n + eps);
      out.row(r) = (centered.array() * inv_std * w(gid).row(0).array() + w(bid).row(0).array()).matrix();
    }
    return out;
  }

  MatX<Scalar> attention(const MatX<Scalar>& q, Eigen::Index tq, const MatX<Scalar>& k, const MatX<Scalar>& v,
                         Eigen::Index tk, int B, bool par) const {
    const int heads = model_.hyper().heads;
    const Eigen::Index d = q.cols() / heads;
    const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(static_cast<Scalar>(d));
    MatX<Scalar> out(q.rows(), q.cols());
#pragma omp parallel for schedule(static) if (par)
    for (int b = 0; b < B; ++b) {
      for (int h = 0; h < heads; ++h) {
        MatX<Scalar> scores = q.block(b * tq, h * d, tq, d) * k.block(b * tk, h * d, tk, d).transpose();
        scores *= inv_sqrt_d;
        for (Eigen::Index r = 0; r < scores.rows(); ++r) {
          const Scalar m = scores.row(r).maxCoeff();
          scores.row(r) = (scores.row(r).array() - m).exp().matrix();
          scores.row(r) /= scores.row(r).sum();
        }
        out.block(b * tq, h * d, tq, d).noalias() = scores * v.block(b * tk, h * d, tk, d);
      }
    }
    return out;
  }

  MatX<Scalar> mlp(const MatX<Scalar>& x, int w1, int b1, int w2, int b2, bool par) const {
    MatX<Scalar> hdn = linear(x, w1, b1, par);
    Scalar* data = hdn.data();
    const Eigen::Index n = hdn.size();
#pragma omp parallel for schedule(static) if (par)
    for (Eigen::Index i = 0; i < n; ++i) data[i] = static_cast<Scalar>(ad::gelu(static_cast<double>(data[i])));
    return linear(hdn, w2, b2, par);
  }

  MatX<Scalar> gate(const MatX<Scalar>& c, const MatX<Scalar>& input, int u, int bias, int logit, bool par) const {
    const MatX<Scalar> z = linear(input, u, bias, par);
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> g =
        w(logit).row(0).unaryExpr([](Scalar s) { return static_cast<Scalar>(ad::sigmoid(static_cast<double>(s))); });
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> keep = Scalar(1) - g;
    MatX<Scalar> out(c.rows(), c.cols());
#pragma omp parallel for schedule(static) if (par)
    for (Eigen::Index r = 0; r < c.rows(); ++r) out.row(r) = (c.row(r).array() * g + z.row(r).array() * keep).matrix();
    return out;
  }

  MatX<Scalar> block(const MatX<Scalar>& h, std::vector<MatX<Scalar>>& states, int B, Eigen::Index T,
                     bool par) const {
    const auto& hp = model_.hyper();
    const Eigen::Index Ns = hp.num_state_tokens();
    MatX<Scalar> x = model_.input_w() >= 0 ? linear(h, model_.input_w(), model_.input_b(), par) : h;
    if (model_.positional() >= 0)
      for (int b = 0; b < B; ++b) x.middleRows(b * T, T) += w(model_.positional());

    for (int l = 0; l < hp.depth; ++l) {
      const CellParams& c = model_.cells()[l];
      MatX<Scalar>& state = states[l];
      const MatX<Scalar> en = layer_norm(x, c.ln_emb_gain, c.ln_emb_bias, par);
      const MatX<Scalar> cn = layer_norm(state, c.ln_state_gain, c.ln_state_bias, par);
      const MatX<Scalar> ke = linear(en, c.key_emb, -1, par);
      const MatX<Scalar> ve = linear(en, c.value_emb, -1, par);
      const MatX<Scalar> kb = linear(cn, c.key_state, -1, par);
      const MatX<Scalar> vb = linear(cn, c.value_state, -1, par);

      // Vertical direction.
      const MatX<Scalar> v_self = attention(linear(en, c.query_emb_vertical, -1, par), T, ke, ve, T, B, par);
      const MatX<Scalar> v_cross = attention(linear(en, c.query_state_vertical, -1, par), T, kb, vb, Ns, B, par);
      MatX<Scalar> vcat(x.rows(), v_self.cols() + v_cross.cols());
      vcat << v_self, v_cross;
      MatX<Scalar> e1 = x + linear(vcat, c.vproj_w, c.vproj_b, par);
      MatX<Scalar> e2 = e1 + mlp(layer_norm(e1, c.vln_gain, c.vln_bias, par), c.vmlp_w1, c.vmlp_b1, c.vmlp_w2,
                                 c.vmlp_b2, par);

      // Horizontal direction.
      const MatX<Scalar> s_self = attention(linear(cn, c.query_state_horizontal, -1, par), Ns, kb, vb, Ns, B, par);
      const MatX<Scalar> s_cross = attention(linear(cn, c.query_emb_horizontal, -1, par), Ns, ke, ve, T, B, par);
      MatX<Scalar> hcat(state.rows(), s_self.cols() + s_cross.cols());
      hcat << s_self, s_cross;
      MatX<Scalar> c1 = gate(state, linear(hcat, c.hproj_w, c.hproj_b, par), c.gate1_u, c.gate1_bias,
                             c.gate1_logit, par);
      const MatX<Scalar> z = mlp(layer_norm(c1, c.hln_gain, c.hln_bias, par), c.hmlp_w1, c.hmlp_b1, c.hmlp_w2,
                                 c.hmlp_b2, par);
      state = gate(c1, z, c.gate2_u, c.gate2_bias, c.gate2_logit, par);
      x = std::move(e2);
    }
    return linear(layer_norm(x, model_.final_ln_gain(), model_.final_ln_bias(), par), model_.output_w(),
                  model_.output_b(), par);
  }

  const BRTModel& model_;
  std::vector<MatX<Scalar>> weights_;
};

}  // namespace hfbrt::kernels
