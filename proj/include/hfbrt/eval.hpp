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

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "hfbrt/brt.hpp"
#include "hfbrt/training.hpp"

namespace hfbrt {

using Rational = boost::multiprecision::cpp_rational;

// Maps a set of samples to their channel estimates (T x 2N each).
using EstimatorFn = std::function<std::vector<Mat>(const Batch&)>;

EstimatorFn ls_estimator();
EstimatorFn oracle_estimator();
EstimatorFn brt_estimator(const BRTModel& model, kernels::Exec exec = kernels::Exec::Parallel);

// NMSE in dB is clamped to this value when the error is exactly zero.
inline constexpr double kNmseFloorDb = -300.0;
double nmse_db_floored(double linear);

struct SweepPoint {
  double snr_db = 0.0;
  double nmse = 0.0;    // mean linear NMSE
  double sem = 0.0;     // standard error of the mean, linear
  double nmse_db = 0.0;
  double sem_db = 0.0;  // first-order propagation to dB
  int samples = 0;
};

// Point i draws its samples from split 0x100 + i, so different estimators
// evaluated with the same seed see identical channels.
std::vector<SweepPoint> nmse_sweep(const EstimatorFn& estimator, const SampleGenerator& gen,
                                   const std::vector<double>& snr_grid, int n_samples, std::uint64_t seed);
std::string format_sweep_csv(const std::vector<SweepPoint>& rows, const std::string& label);

struct NearFieldPmf {
  std::vector<Rational> exact;  // P(k near-field paths), k = 0..L_max
  std::vector<double> probs;
  Rational p_nlos;  // per-NLoS-path near-field probability
  bool los_near = false;
};

// Closed form: the LoS path is near-field iff r_1 < Z; each NLoS path is
// independently near-field with p = clamp((Z - r_min) / (r_max - r_min), 0, 1).
// With a range of path counts the PMF is the uniform mixture over L.
NearFieldPmf near_field_pmf(const ScenarioConfig& scenario);
std::vector<double> monte_carlo_pmf(const ScenarioConfig& scenario, long long draws, std::uint64_t seed);
std::string format_pmf_csv(const NearFieldPmf& pmf, const std::vector<double>& monte_carlo = {});

struct GeneralizationRow {
  std::string variant;
  double snr_db = 0.0;
  double nmse_db = 0.0;
  double reference_nmse_db = 0.0;
  double delta_db = 0.0;  // nmse_db - reference_nmse_db
};

// Evaluates one estimator on every variant; the reference is the training
// scenario. All variants share the reference scenario's combiner.
std::vector<GeneralizationRow> generalization_sweep(
    const EstimatorFn& estimator, const ScenarioConfig& reference,
    const std::vector<std::pair<std::string, ScenarioConfig>>& variants, const std::vector<double>& snr_grid,
    int n_samples, std::uint64_t seed);
// Difference table between two sweeps over the same grid: b minus a.
std::vector<GeneralizationRow> delta_table(const std::vector<SweepPoint>& a, const std::vector<SweepPoint>& b,
                                           const std::string& label);
std::string format_generalization_csv(const std::vector<GeneralizationRow>& rows);

struct WidebandSurface {
  std::vector<double> snr_grid;
  Mat nmse_db;  // K x |snr_grid|
  std::vector<double> min_db, max_db, std_db;  // across subcarriers, per SNR
};

WidebandSurface wideband_surface(const EstimatorFn& estimator, const SampleGenerator& gen,
                                 const std::vector<double>& snr_grid, int n_samples, std::uint64_t seed);
std::string format_surface_csv(const WidebandSurface& s);

// Mean NMSE of h_0 .. h_{N_t} over the samples, and the per-sample final
// versus initial comparison.
struct IterationTrace {
  std::vector<double> mean_nmse;  // linear, index t
  double fraction_improved = 0.0;  // share of samples with NMSE(h_Nt) <= NMSE(h_0)
};
IterationTrace iteration_trace(const BRTModel& model, const Batch& samples,
                               kernels::Exec exec = kernels::Exec::Parallel);

struct HyperRow {
  std::string axis;
  int value = 0;
  double nmse_db = 0.0;
  double ls_nmse_db = 0.0;
};

struct HyperSweep {
  std::vector<HyperRow> rows;
  std::vector<double> trace_db;  // iters axis only: trace of the largest-N_t model
};

// Trains one model per value at the given scenario and reports NMSE at a
// fixed SNR. axis is "iters", "heads" or "depth".
HyperSweep hyper_sweep(const std::string& axis, const std::vector<int>& values, const BRTHyperParams& base,
                       const ScenarioConfig& scenario, const TrainConfig& cfg, double eval_snr_db, int n_eval);
std::string format_hyper_csv(const HyperSweep& s);

struct BenchRow {
  int subcarriers = 1;
  int batch = 1;
  double per_batch_ms = 0.0;
  double per_sample_ms = 0.0;
};

// float32 forward timing; warmup runs are excluded.
std::vector<BenchRow> bench_inference(const BRTModel& model, const std::vector<int>& batch_sizes,
                                      const std::vector<int>& subcarrier_counts, int warmup, int reps,
                                      kernels::Exec exec = kernels::Exec::Parallel);
std::string format_bench_csv(const std::vector<BenchRow>& rows);

// External curves in `snr_db,nmse_db,label` form, passed through for plotting.
struct CurvePoint {
  double snr_db = 0.0;
  double nmse_db = 0.0;
  std::string label;
};
std::vector<CurvePoint> load_curves_csv(const std::string& path);
std::string format_curves_csv(const std::vector<CurvePoint>& points);
std::vector<CurvePoint> to_curve(const std::vector<SweepPoint>& rows, const std::string& label);

void write_text(const std::string& path, const std::string& text);

}  // namespace hfbrt
