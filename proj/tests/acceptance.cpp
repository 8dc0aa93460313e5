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

// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "hfbrt/brt_kernels.hpp"
#include "hfbrt/eval.hpp"
#include "hfbrt/training.hpp"
#include "test_util.hpp"

using namespace hfbrt;
using ad::Graph;
using ad::Var;
using testutil::contract;
using testutil::gradient_error;
using testutil::random_mat;

namespace {

int failures = 0;

void report(int id, const std::string& name, const std::function<bool(std::ostringstream&)>& check) {
  std::ostringstream detail;
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    ok = check(detail);
  } catch (const std::exception& e) {
    detail << "exception: " << e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!ok) ++failures;
  std::printf("%s %2d %s: %s [%.2f s]\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.str().c_str(), secs);
  std::fflush(stdout);
}

bool criterion_geometry(std::ostringstream& d) {
  const ArrayConfig cfg;
  const double D = aperture(cfg);
  const double Z = rayleigh_distance(D, cfg.wavelength());
  d << "D = " << D << " m, Z = " << Z << " m";
  return std::abs(D - 0.1004) < 5e-4 && Z >= 19.8 && Z <= 20.4;
}

bool criterion_normalization(std::ostringstream& d) {
  ScenarioConfig sc = baseline_scenario();
  const ArrayLayout layout(sc.array);
  const double target = sc.array.num_elements();
  const int draws = 10000, K = 32;
  const double bandwidth = 15e9;
  double worst = 0.0;
  long long rows = 0;
#pragma omp parallel for schedule(dynamic, 16) reduction(max : worst) reduction(+ : rows)
  for (int i = 0; i < draws; ++i) {
    Rng rng = make_stream(0xACC2, static_cast<std::uint64_t>(i));
    const PathSet paths = sample_paths(sc, rng);
    const ChannelRealization narrow = realize_channel(paths, sc, layout);
    const ChannelRealization wide = wideband_channel(paths, sc, layout, K, bandwidth);
    for (Eigen::Index k = 0; k < narrow.h.rows(); ++k)
      worst = std::max(worst, std::abs(narrow.h.row(k).squaredNorm() - target) / target);
    for (Eigen::Index k = 0; k < wide.h.rows(); ++k)
      worst = std::max(worst, std::abs(wide.h.row(k).squaredNorm() - target) / target);
    rows += narrow.h.rows() + wide.h.rows();
  }
  d << rows << " rows, max relative deviation " << worst;
  return worst < 1e-10;
}

bool criterion_near_far(std::ostringstream& d) {
  const ArrayConfig cfg;
  double worst = 0.0;
  for (int a = 0; a < 24; ++a) {
    for (int e = 0; e < 12; ++e) {
      const double az = -M_PI + 2.0 * M_PI * a / 24.0;
      const double el = M_PI / 2.0 * e / 12.0;
      const CVec nf = near_field_response(az, el, 1e4, cfg);
      const CVec ff = far_field_response(az, el, 1e4, cfg);
      for (Eigen::Index i = 0; i < nf.size(); ++i) worst = std::max(worst, std::abs(std::arg(nf[i] / ff[i])));
    }
  }
  d << "max phase gap " << worst << " rad";
  return worst < 1e-2;
}

bool criterion_decorrelation(std::ostringstream& d) {
  const ArrayConfig cfg;
  const double bound = 1e-8 * 2.0 * cfg.num_elements();
  double worst_trace = 0.0, worst_eta = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto op = MeasurementOperator::from_seed(cfg, 128, 1000 + i);
    const LinearInitializer init = build_initializer(op);
    worst_trace = std::max(worst_trace, std::abs(decorrelation_trace(init, op.real_operator())));
    worst_eta = std::max(worst_eta, std::abs(init.eta - 2.0));
  }
  d << "max |trace| " << worst_trace << " (bound " << bound << "), max |eta - 2| " << worst_eta;
  return worst_trace < bound && worst_eta < 1e-10;
}

bool criterion_gates(std::ostringstream& d) {
  Rng rng(5);
  const Mat c = random_mat(4, 8, rng), v = random_mat(4, 8, rng), u = random_mat(8, 8, rng), s = random_mat(1, 8, rng);
  const Mat z = (v * u).rowwise() + s.row(0);
  auto gate = [&](double logit) {
    Graph g;
    return Mat(brt::fixed_gate(g.constant(c), g.constant(v), g.constant(u), g.constant(s),
                               g.constant(Mat::Constant(1, 8, logit)))
                   .value());
  };
  const bool keep = gate(1e3) == c;
  const double overwrite = (gate(-1e3) - z).cwiseAbs().maxCoeff();
  const double mid = (gate(0.0) - 0.5 * (c + z)).cwiseAbs().maxCoeff();
  d << "retention exact " << (keep ? "yes" : "no") << ", overwrite gap " << overwrite << ", midpoint gap " << mid;
  return keep && overwrite == 0.0 && mid < 1e-15;
}

bool criterion_gradients(std::ostringstream& d) {
  Rng rng(6);
  const Mat a = random_mat(3, 4, rng), b = random_mat(4, 5, rng), c = random_mat(3, 4, rng);
  const Mat w34 = random_mat(3, 4, rng), w35 = random_mat(3, 5, rng), w43 = random_mat(4, 3, rng);
  const Mat row = random_mat(1, 4, rng), one = Mat::Constant(1, 1, 0.8);
  using F = testutil::ScalarFn;
  const std::vector<std::pair<const char*, std::pair<F, std::vector<Mat>>>> ops = {
      {"matmul", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::matmul(x[0], x[1]), w35); }, {a, b}}},
      {"add", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::add(x[0], x[1]), w34); }, {a, c}}},
      {"sub", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::sub(x[0], x[1]), w34); }, {a, c}}},
      {"hadamard", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::hadamard(x[0], x[1]), w34); }, {a, c}}},
      {"scale", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::scale(x[0], -1.7), w34); }, {a}}},
      {"scale_by", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::scale_by(x[0], x[1]), w34); }, {a, one}}},
      {"add_row", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::add_row(x[0], x[1]), w34); }, {a, row}}},
      {"mul_row", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::mul_row(x[0], x[1]), w34); }, {a, row}}},
      {"one_minus", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::one_minus(x[0]), w34); }, {a}}},
      {"concat_cols",
       {[&](Graph&, const std::vector<Var>& x) {
          return contract(ad::slice_cols(ad::concat_cols({x[0], x[1]}), 1, 4), w34);
        },
        {a, c}}},
      {"concat_rows",
       {[&](Graph&, const std::vector<Var>& x) {
          return contract(ad::slice_rows(ad::concat_rows({x[0], x[1]}), 2, 3), w34);
        },
        {a, c}}},
      {"transpose", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::transpose(x[0]), w43); }, {a}}},
      {"softmax_rows", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::softmax_rows(x[0]), w34); }, {a}}},
      {"sigmoid", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::sigmoid(x[0]), w34); }, {a}}},
      {"gelu", {[&](Graph&, const std::vector<Var>& x) { return contract(ad::gelu(x[0]), w34); }, {a}}},
      {"layer_norm",
       {[&](Graph&, const std::vector<Var>& x) { return contract(ad::layer_norm(x[0], x[1], x[2]), w34); },
        {a, random_mat(1, 4, rng), random_mat(1, 4, rng)}}},
      {"sum", {[&](Graph&, const std::vector<Var>& x) { return ad::sum(x[0]); }, {a}}},
      {"squared_norm", {[&](Graph&, const std::vector<Var>& x) { return ad::squared_norm(x[0]); }, {a}}},
      {"attention",
       {[&](Graph&, const std::vector<Var>& x) { return contract(brt::attention(x[0], x[1], x[2], 2), w34); },
        {a, random_mat(5, 4, rng), random_mat(5, 4, rng)}}},
  };
  double worst_op = 0.0;
  std::string worst_name;
  for (const auto& [name, spec] : ops) {
    const double err = gradient_error(spec.first, spec.second);
    if (err > worst_op) {
      worst_op = err;
      worst_name = name;
    }
  }

  double worst_e2e = 0.0;
  for (int T : {1, 4}) {
    BRTHyperParams hp = toy_hyper();
    hp.tokens = T;
    BRTModel m(hp, 60 + T);
    m.randomize(70 + T, 0.2);
    Rng r(80 + T);
    const Mat h0 = random_mat(T, hp.token_width, r), truth = random_mat(T, hp.token_width, r);
    auto loss_value = [&]() {
      Graph g;
      return brt::nmse_loss(g, brt::refine(g, m, g.constant(h0)).back(), truth).value()(0, 0);
    };
    Graph g;
    Var loss = brt::nmse_loss(g, brt::refine(g, m, g.constant(h0)).back(), truth);
    ad::GradBuffer grads = m.params().zero_grads();
    g.backward(loss, grads);
    for (int id = 0; id < m.params().size(); ++id) {
      Mat& p = m.params().value(id);
      Mat numeric(p.rows(), p.cols());
      for (Eigen::Index i = 0; i < p.size(); ++i)
        numeric.data()[i] = testutil::five_point_derivative(loss_value, p.data()[i]);
      const double scale = std::max({grads[id].lpNorm<Eigen::Infinity>(), numeric.lpNorm<Eigen::Infinity>(), 1e-12});
      if (scale > 1e-8) worst_e2e = std::max(worst_e2e, (grads[id] - numeric).lpNorm<Eigen::Infinity>() / scale);
    }
  }
  d << ops.size() << " ops, worst op error " << worst_op << " (" << worst_name << "), end-to-end " << worst_e2e;
  return worst_op < 1e-4 && worst_e2e < 1e-4;
}

bool criterion_param_count(std::ostringstream& d) {
  BRTHyperParams a = toy_hyper(), b = toy_hyper();
  a.iters = 1;
  b.iters = 10;
  const BRTModel ma(a, 1), mb(b, 1);
  const auto diff = mb.param_count() - ma.param_count();
  d << "N_t=1: " << ma.param_count() << ", N_t=10: " << mb.param_count() << ", difference " << diff;
  return diff == 9 && ma.block_param_count() == mb.block_param_count();
}

bool criterion_pmf(std::ostringstream& d) {
  const ScenarioConfig sc = baseline_scenario();
  const NearFieldPmf pmf = near_field_pmf(sc);
  bool exact = pmf.exact.size() == 6 && pmf.exact[5] == 0;
  const Rational third(1, 3);
  Rational binom = 1;
  for (int k = 0; k <= 4 && exact; ++k) {
    if (k > 0) binom = binom * (4 - k + 1) / k;
    Rational term = binom;
    for (int i = 0; i < k; ++i) term *= 2 * third;
    for (int i = 0; i < 4 - k; ++i) term *= third;
    exact = exact && pmf.exact[k] == term;
  }
  const auto mc = monte_carlo_pmf(sc, 1000000, 8);
  double worst = 0.0;
  for (std::size_t k = 0; k < mc.size(); ++k) worst = std::max(worst, std::abs(mc[k] - pmf.probs[k]));
  d << "P(4) = " << pmf.exact[4] << ", exact binomial " << (exact ? "yes" : "no") << ", max Monte-Carlo gap "
    << worst;
  return exact && pmf.exact[4] == Rational(16, 81) && worst < 0.005;
}

struct ToyRun {
  BRTModel model;
  TrainResult result;
};

ToyRun train_toy(int iters) {
  const ScenarioConfig sc = toy_scenario();
  BRTHyperParams hp = hyper_for(sc, toy_hyper());
  hp.iters = iters;
  TrainConfig cfg = toy_train_config();
  cfg.workers = 2;
  BRTModel model(hp, cfg.seed);
  TrainResult r = train(model, sc, cfg);
  return {std::move(model), std::move(r)};
}

bool criterion_learning(std::ostringstream& d) {
  const ToyRun run = train_toy(toy_hyper().iters);
  const TrainConfig cfg = toy_train_config();
  const SampleGenerator gen(toy_scenario());
  const Batch val = generate_range(gen, cfg.seed, 2, 0, cfg.val_samples);
  const IterationTrace tr = iteration_trace(run.model, val);
  const double brt_db = to_db(run.result.val_nmse), ls_db = to_db(run.result.ls_val_nmse);
  d << "val NMSE " << brt_db << " dB vs LS " << ls_db << " dB (gap " << ls_db - brt_db << " dB), improved on "
    << 100.0 * tr.fraction_improved << "% of samples";
  return ls_db - brt_db >= 3.0 && tr.fraction_improved >= 0.95;
}

bool criterion_beta_zero(std::ostringstream& d) {
  const ScenarioConfig sc = toy_scenario();
  BRTModel model(hyper_for(sc, toy_hyper()), 3);
  model.randomize(4);
  for (int id : model.betas()) model.params().value(id).setZero();
  const SampleGenerator gen(sc);
  ChannelRealization ch;
  Observation obs;
  int exact = 0;
  const int n = 50;
  for (int i = 0; i < n; ++i) {
    Rng rng = make_stream(0xB0, static_cast<std::uint64_t>(i));
    gen.make(rng, std::nullopt, &ch, &obs);
    if (estimate(obs, gen.initializer(), model) == ls_estimate(obs, gen.initializer())) ++exact;
  }
  d << exact << "/" << n << " outputs identical";
  return exact == n;
}

bool criterion_iterations(std::ostringstream& d) {
  const ToyRun run = train_toy(5);
  const SampleGenerator gen(toy_scenario());
  const Batch val = generate_range(gen, toy_train_config().seed, 2, 0, 2000);
  const IterationTrace tr = iteration_trace(run.model, val);
  bool monotone = true;
  d << "trace dB:";
  for (std::size_t t = 0; t < tr.mean_nmse.size(); ++t) {
    d << ' ' << to_db(tr.mean_nmse[t]);
    if (t > 0 && tr.mean_nmse[t] > tr.mean_nmse[t - 1]) monotone = false;
  }
  return monotone && tr.mean_nmse.size() == 6;
}

bool criterion_equivariance(std::ostringstream& d) {
  const int K = 8;
  BRTHyperParams hp = toy_hyper();
  hp.tokens = K;
  BRTModel m(hp, 12);
  m.randomize(13, 0.3);
  Rng rng(14);
  const Mat h0 = random_mat(K, hp.token_width, rng);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::PermutationMatrix<Eigen::Dynamic> P(K);
    P.setIdentity();
    std::shuffle(P.indices().data(), P.indices().data() + K, rng);
    BRTModel permuted = m;
    permuted.params().value(permuted.positional()) = P * m.params().value(m.positional());
    const Mat a = P * refine_reference(m, h0).final_estimate();
    const Mat b = refine_reference(permuted, P * h0).final_estimate();
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff()));
  }
  d << "max relative gap " << worst << " over 5 permutations";
  return worst <= 1e-12;
}

bool criterion_determinism(std::ostringstream& d) {
  const ScenarioConfig sc = toy_scenario();
  TrainConfig cfg = toy_train_config();
  cfg.epochs = 3;
  auto run = [&](int workers) {
    TrainConfig c = cfg;
    c.workers = workers;
    BRTModel m(hyper_for(sc, toy_hyper()), c.seed);
    const TrainResult r = train(m, sc, c);
    const SampleGenerator gen(sc);
    const auto rows = nmse_sweep(brt_estimator(m), gen, {0, 5, 10, 15, 20}, 200, c.seed);
    return std::make_pair(format_log_csv(r.log), format_sweep_csv(rows, "brt"));
  };
  const auto a = run(1), b = run(1), c = run(4);
  const bool logs = a.first == b.first && a.first == c.first;
  const bool sweeps = a.second == b.second && a.second == c.second;
  d << "training logs identical " << (logs ? "yes" : "no") << ", sweep CSVs identical " << (sweeps ? "yes" : "no");
  return logs && sweeps;
}

}  // namespace

int main() {
  report(1, "aperture and Rayleigh distance", criterion_geometry);
  report(2, "channel normalization", criterion_normalization);
  report(3, "near/far consistency", criterion_near_far);
  report(4, "de-correlation and scaling", criterion_decorrelation);
  report(5, "gate limits", criterion_gates);
  report(6, "gradient correctness", criterion_gradients);
  report(7, "parameter-count invariance", criterion_param_count);
  report(8, "near-field PMF", criterion_pmf);
  report(9, "learning oracle", criterion_learning);
  report(10, "zero-step identity", criterion_beta_zero);
  report(11, "iteration sensitivity", criterion_iterations);
  report(12, "token equivariance", criterion_equivariance);
  report(13, "determinism", criterion_determinism);
  return failures == 0 ? 0 : 1;
}
