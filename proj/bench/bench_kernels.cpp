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

// Times the serial reference against the OpenMP kernels on the same inputs
// and checks that both produce identical outputs.
//
//   bench_kernels [--hidden N] [--depth N] [--iters N] [--subcarriers K]
//                 [--batch B] [--reps R] [--elements N]

#include <chrono>
#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <omp.h>

#include "hfbrt/brt_kernels.hpp"

using hfbrt::kernels::Exec;

namespace {

template <typename Scalar>
double time_ms(const hfbrt::kernels::BatchedBRT<Scalar>& net, const std::vector<hfbrt::Mat>& x, Exec exec,
               int reps, std::vector<hfbrt::kernels::MatX<Scalar>>& out) {
  out = net.refine(x, exec);  // warmup
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) out = net.refine(x, exec);
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
}

template <typename Scalar>
void run(const char* label, const hfbrt::BRTModel& model, const std::vector<hfbrt::Mat>& x, int reps) {
  hfbrt::kernels::BatchedBRT<Scalar> net(model);
  std::vector<hfbrt::kernels::MatX<Scalar>> serial, parallel;
  const double ts = time_ms(net, x, Exec::Serial, reps, serial);
  const double tp = time_ms(net, x, Exec::Parallel, reps, parallel);
  bool same = true;
  for (std::size_t i = 0; i < serial.size(); ++i) same = same && serial[i] == parallel[i];
  std::printf("%-8s serial %10.3f ms  parallel %10.3f ms  speedup %5.2fx  identical=%s\n", label, ts, tp, ts / tp,
              same ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs OpenMP BRT inference kernels"};
  int hidden = 32, depth = 2, iters = 2, K = 1, batch = 64, reps = 5, elements = 16;
  app.add_option("--hidden", hidden, "embedding width");
  app.add_option("--depth", depth, "cells per block");
  app.add_option("--iters", iters, "refinement iterations");
  app.add_option("--subcarriers", K, "tokens per sample");
  app.add_option("--batch", batch, "samples per call");
  app.add_option("--reps", reps, "timed repetitions");
  app.add_option("--elements", elements, "antenna elements (token width is twice this)");
  CLI11_PARSE(app, argc, argv);

  hfbrt::BRTHyperParams hp;
  hp.depth = depth;
  hp.hidden = hidden;
  hp.heads = 1;
  hp.head_dim = std::max(1, hidden / 2);
  hp.iters = iters;
  hp.tokens = K;
  hp.token_width = 2 * elements;
  hfbrt::BRTModel model(hp, 1);
  model.randomize(2, 0.2);

  hfbrt::Rng rng = hfbrt::make_stream(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<hfbrt::Mat> x(batch, hfbrt::Mat(K, hp.token_width));
  for (auto& m : x) m = m.unaryExpr([&](double) { return gauss(rng); });

  std::printf("threads=%d batch=%d tokens=%d width=%d hidden=%d depth=%d iters=%d\n", omp_get_max_threads(), batch, K,
              hp.token_width, hidden, depth, iters);
  run<double>("float64", model, x, reps);
  run<float>("float32", model, x, reps);
  return 0;
}
