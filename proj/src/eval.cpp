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

#include "hfbrt/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace hfbrt {

EstimatorFn ls_estimator() {
  return [](const Batch& b) {
    std::vector<Mat> out;
    for (const auto& s : b) out.push_back(s.h0);
    return out;
  };
}

EstimatorFn oracle_estimator() {
  return [](const Batch& b) {
    std::vector<Mat> out;
    for (const auto& s : b) out.push_back(s.truth);
    return out;
  };
}

EstimatorFn brt_estimator(const BRTModel& model, kernels::Exec exec) {
  return [&model, exec](const Batch& b) { return brt_estimates(model, b, exec); };
}

double nmse_db_floored(double linear) { return linear > 0.0 ? std::max(to_db(linear), kNmseFloorDb) : kNmseFloorDb; }

namespace {

constexpr double kDbPerLn = 10.0 / 2.302585092994045684;

std::uint64_t sweep_split(std::size_t i) { return 0x100 + i; }

SweepPoint summarize(double snr, const std::vector<double>& values) {
  SweepPoint p;
  p.snr_db = snr;
  p.samples = static_cast<int>(values.size());
  const double n = static_cast<double>(values.size());
  p.nmse = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - p.nmse) * (v - p.nmse);
  p.sem = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  p.nmse_db = nmse_db_floored(p.nmse);
  p.sem_db = p.nmse > 0.0 ? kDbPerLn * p.sem / p.nmse : 0.0;
  return p;
}

std::vector<double> sample_nmse(const Batch& samples, const std::vector<Mat>& est) {
  if (est.size() != samples.size()) throw ShapeError("estimator returned the wrong number of estimates");
  std::vector<double> v(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) v[i] = nmse(samples[i].truth, est[i]);
  return v;
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

std::vector<SweepPoint> nmse_sweep(const EstimatorFn& estimator, const SampleGenerator& gen,
                                   const std::vector<double>& snr_grid, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("sweep needs at least one sample per point");
  std::vector<SweepPoint> rows;
  for (std::size_t i = 0; i < snr_grid.size(); ++i) {
    const Batch samples = generate_range(gen, seed, sweep_split(i), 0, n_samples, snr_grid[i]);
    rows.push_back(summarize(snr_grid[i], sample_nmse(samples, estimator(samples))));
  }
  return rows;
}

std::string format_sweep_csv(const std::vector<SweepPoint>& rows, const std::string& label) {
  std::ostringstream os;
  os << "snr_db,nmse_db,stderr_db,nmse,stderr,samples,label\n";
  for (const auto& r : rows)
    os << fmt(r.snr_db) << ',' << fmt(r.nmse_db) << ',' << fmt(r.sem_db) << ',' << fmt(r.nmse) << ','
       << fmt(r.sem) << ',' << r.samples << ',' << label << '\n';
  return os.str();
}

// -------------------------------------------------------------------- PMF

NearFieldPmf near_field_pmf(const ScenarioConfig& sc) {
  using boost::multiprecision::cpp_int;
  sc.validate();
  const Rational z(sc.rayleigh());
  const Rational rmin(sc.nlos_distance_min), rmax(sc.nlos_distance_max);
  NearFieldPmf out;
  out.los_near = sc.los_distance < sc.rayleigh();
  if (rmax == rmin) {
    out.p_nlos = rmin < z ? Rational(1) : Rational(0);
  } else {
    Rational p = (z - rmin) / (rmax - rmin);
    out.p_nlos = p < 0 ? Rational(0) : (p > 1 ? Rational(1) : p);
  }
  const Rational q = Rational(1) - out.p_nlos;
  const int lmax = sc.paths_max;
  out.exact.assign(lmax + 1, Rational(0));
  const Rational weight(cpp_int(1), cpp_int(sc.paths_max - sc.paths_min + 1));
  for (int L = sc.paths_min; L <= sc.paths_max; ++L) {
    const int n = L - 1;  // NLoS paths
    cpp_int binom = 1;
    for (int k = 0; k <= n; ++k) {
      if (k > 0) binom = binom * (n - k + 1) / k;
      Rational term(binom);
      for (int i = 0; i < k; ++i) term *= out.p_nlos;
      for (int i = 0; i < n - k; ++i) term *= q;
      out.exact[k + (out.los_near ? 1 : 0)] += weight * term;
    }
  }
  for (const auto& r : out.exact) out.probs.push_back(static_cast<double>(r));
  return out;
}

std::vector<double> monte_carlo_pmf(const ScenarioConfig& sc, long long draws, std::uint64_t seed) {
  const double z = sc.rayleigh();
  std::vector<long long> counts(sc.paths_max + 1, 0);
  Rng rng = make_stream(seed, 0x9F);
  for (long long i = 0; i < draws; ++i) {
    const PathSet set = sample_paths(sc, rng);
    int near = 0;
    for (const auto& p : set.paths) near += p.distance < z ? 1 : 0;
    ++counts[near];
  }
  std::vector<double> out;
  for (long long c : counts) out.push_back(static_cast<double>(c) / static_cast<double>(draws));
  return out;
}

std::string format_pmf_csv(const NearFieldPmf& pmf, const std::vector<double>& mc) {
  std::ostringstream os;
  os << "near_field_paths,probability,exact" << (mc.empty() ? "" : ",monte_carlo") << '\n';
  for (std::size_t k = 0; k < pmf.exact.size(); ++k) {
    os << k << ',' << fmt(pmf.probs[k]) << ',' << pmf.exact[k];
    if (!mc.empty()) os << ',' << fmt(k < mc.size() ? mc[k] : 0.0);
    os << '\n';
  }
  return os.str();
}

// --------------------------------------------------------- generalization

std::vector<GeneralizationRow> delta_table(const std::vector<SweepPoint>& a, const std::vector<SweepPoint>& b,
                                           const std::string& label) {
  if (a.size() != b.size()) throw ShapeError("delta_table: sweeps have different grids");
  std::vector<GeneralizationRow> rows;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].snr_db != b[i].snr_db) throw ShapeError("delta_table: sweeps have different grids");
    rows.push_back({label, b[i].snr_db, b[i].nmse_db, a[i].nmse_db, b[i].nmse_db - a[i].nmse_db});
  }
  return rows;
}

std::vector<GeneralizationRow> generalization_sweep(
    const EstimatorFn& estimator, const ScenarioConfig& reference,
    const std::vector<std::pair<std::string, ScenarioConfig>>& variants, const std::vector<double>& snr_grid,
    int n_samples, std::uint64_t seed) {
  const SampleGenerator ref_gen(reference);
  auto op = std::make_shared<const MeasurementOperator>(ref_gen.op());
  const auto ref_rows = nmse_sweep(estimator, ref_gen, snr_grid, n_samples, seed);
  std::vector<GeneralizationRow> out;
  for (const auto& [name, sc] : variants) {
    const SampleGenerator gen(sc, op);
    const auto rows = nmse_sweep(estimator, gen, snr_grid, n_samples, seed);
    for (auto& r : delta_table(ref_rows, rows, name)) out.push_back(std::move(r));
  }
  return out;
}

std::string format_generalization_csv(const std::vector<GeneralizationRow>& rows) {
  std::ostringstream os;
  os << "variant,snr_db,nmse_db,reference_nmse_db,delta_nmse_db\n";
  for (const auto& r : rows)
    os << r.variant << ',' << fmt(r.snr_db) << ',' << fmt(r.nmse_db) << ',' << fmt(r.reference_nmse_db) << ','
       << fmt(r.delta_db) << '\n';
  return os.str();
}

// --------------------------------------------------------------- wideband

WidebandSurface wideband_surface(const EstimatorFn& estimator, const SampleGenerator& gen,
                                 const std::vector<double>& snr_grid, int n_samples, std::uint64_t seed) {
  const int K = gen.scenario().subcarriers;
  WidebandSurface s;
  s.snr_grid = snr_grid;
  s.nmse_db.resize(K, static_cast<Eigen::Index>(snr_grid.size()));
  for (std::size_t j = 0; j < snr_grid.size(); ++j) {
    const Batch samples = generate_range(gen, seed, sweep_split(j), 0, n_samples, snr_grid[j]);
    const auto est = estimator(samples);
    Vec acc = Vec::Zero(K);
    for (std::size_t i = 0; i < samples.size(); ++i)
      acc += (samples[i].truth - est[i]).rowwise().squaredNorm().cwiseQuotient(
          samples[i].truth.rowwise().squaredNorm());
    acc /= static_cast<double>(samples.size());
    for (int k = 0; k < K; ++k) s.nmse_db(k, j) = nmse_db_floored(acc[k]);
    const Vec col = s.nmse_db.col(j);
    const double mean = col.mean();
    s.min_db.push_back(col.minCoeff());
    s.max_db.push_back(col.maxCoeff());
    s.std_db.push_back(K > 1 ? std::sqrt((col.array() - mean).square().sum() / (K - 1)) : 0.0);
  }
  return s;
}

std::string format_surface_csv(const WidebandSurface& s) {
  std::ostringstream os;
  os << "subcarrier,snr_db,nmse_db\n";
  for (Eigen::Index j = 0; j < s.nmse_db.cols(); ++j)
    for (Eigen::Index k = 0; k < s.nmse_db.rows(); ++k)
      os << k << ',' << fmt(s.snr_grid[j]) << ',' << fmt(s.nmse_db(k, j)) << '\n';
  return os.str();
}

// ------------------------------------------------------------ hyper sweep

IterationTrace iteration_trace(const BRTModel& model, const Batch& samples, kernels::Exec exec) {
  kernels::BatchedBRT<double> net(model);
  std::vector<Mat> h0;
  for (const auto& s : samples) h0.push_back(s.h0);
  std::vector<std::vector<Mat>> trace;
  net.refine(h0, exec, &trace);
  IterationTrace out;
  out.mean_nmse.assign(model.hyper().iters + 1, 0.0);
  int improved = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t t = 0; t < trace[i].size(); ++t) out.mean_nmse[t] += nmse(samples[i].truth, trace[i][t]);
    if (nmse(samples[i].truth, trace[i].back()) <= nmse(samples[i].truth, trace[i].front())) ++improved;
  }
  for (auto& v : out.mean_nmse) v /= static_cast<double>(samples.size());
  out.fraction_improved = static_cast<double>(improved) / static_cast<double>(samples.size());
  return out;
}

HyperSweep hyper_sweep(const std::string& axis, const std::vector<int>& values, const BRTHyperParams& base,
                       const ScenarioConfig& scenario, const TrainConfig& cfg, double eval_snr_db, int n_eval) {
  if (axis != "iters" && axis != "heads" && axis != "depth")
    throw ConfigError("hyper_sweep axis must be iters, heads or depth");
  if (values.empty()) throw ConfigError("hyper_sweep needs at least one value");
  const SampleGenerator gen(scenario);
  const auto ls = nmse_sweep(ls_estimator(), gen, {eval_snr_db}, n_eval, cfg.seed);
  HyperSweep out;
  for (int v : values) {
    BRTHyperParams hp = hyper_for(scenario, base);
    if (axis == "iters") hp.iters = v;
    if (axis == "heads") {
      hp.head_dim = std::max(1, hp.head_dim * hp.heads / v);
      hp.heads = v;
    }
    if (axis == "depth") hp.depth = v;
    BRTModel model(hp, cfg.seed);
    train(model, scenario, cfg);
    const auto r = nmse_sweep(brt_estimator(model), gen, {eval_snr_db}, n_eval, cfg.seed);
    out.rows.push_back({axis, v, r[0].nmse_db, ls[0].nmse_db});
    if (axis == "iters" && v == *std::max_element(values.begin(), values.end()) && out.trace_db.empty()) {
      const Batch samples = generate_range(gen, cfg.seed, sweep_split(0), 0, n_eval, eval_snr_db);
      for (double m : iteration_trace(model, samples).mean_nmse) out.trace_db.push_back(nmse_db_floored(m));
    }
  }
  return out;
}

std::string format_hyper_csv(const HyperSweep& s) {
  std::ostringstream os;
  os << "axis,value,nmse_db,ls_nmse_db\n";
  for (const auto& r : s.rows) os << r.axis << ',' << r.value << ',' << fmt(r.nmse_db) << ',' << fmt(r.ls_nmse_db) << '\n';
  return os.str();
}

// ------------------------------------------------------------------ bench

std::vector<BenchRow> bench_inference(const BRTModel& model, const std::vector<int>& batch_sizes,
                                      const std::vector<int>& subcarrier_counts, int warmup, int reps,
                                      kernels::Exec exec) {
  if (reps < 1) throw ConfigError("bench needs at least one timed repetition");
  std::vector<BenchRow> rows;
  for (int K : subcarrier_counts) {
    const BRTModel m = model.hyper().tokens == K ? model : model.resized(K);
    kernels::BatchedBRT<float> net(m);
    Rng rng = make_stream(0xBE7C, static_cast<std::uint64_t>(K));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int B : batch_sizes) {
      if (B < 1) throw ConfigError("batch sizes must be >= 1");
      std::vector<Mat> inputs(B, Mat(K, m.hyper().token_width));
      for (auto& x : inputs) x = x.unaryExpr([&](double) { return gauss(rng); });
      for (int w = 0; w < warmup; ++w) net.refine(inputs, exec);
      const auto t0 = std::chrono::steady_clock::now();
      for (int r = 0; r < reps; ++r) net.refine(inputs, exec);
      const auto t1 = std::chrono::steady_clock::now();
      const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
      rows.push_back({K, B, ms, ms / B});
    }
  }
  return rows;
}

std::string format_bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "subcarriers,batch,per_batch_ms,per_sample_ms\n";
  for (const auto& r : rows)
    os << r.subcarriers << ',' << r.batch << ',' << fmt(r.per_batch_ms) << ',' << fmt(r.per_sample_ms) << '\n';
  return os.str();
}

// ----------------------------------------------------------------- curves

std::vector<CurvePoint> load_curves_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("snr_db,nmse_db,label", 0) != 0)
    throw ConfigError(path + ": expected header 'snr_db,nmse_db,label'");
  std::vector<CurvePoint> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected three fields");
    try {
      out.push_back({std::stod(a), std::stod(b), c});
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

std::string format_curves_csv(const std::vector<CurvePoint>& points) {
  std::ostringstream os;
  os << "snr_db,nmse_db,label\n";
  for (const auto& p : points) os << fmt(p.snr_db) << ',' << fmt(p.nmse_db) << ',' << p.label << '\n';
  return os.str();
}

std::vector<CurvePoint> to_curve(const std::vector<SweepPoint>& rows, const std::string& label) {
  std::vector<CurvePoint> out;
  for (const auto& r : rows) out.push_back({r.snr_db, r.nmse_db, label});
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("failed while writing '" + path + "'");
}

}  // namespace hfbrt
