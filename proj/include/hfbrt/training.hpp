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

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hfbrt/brt.hpp"
#include "hfbrt/brt_kernels.hpp"
#include "hfbrt/channel.hpp"
#include "hfbrt/config.hpp"
#include "hfbrt/estimators.hpp"
#include "hfbrt/measurement.hpp"

namespace hfbrt {

struct TrainConfig {
  int epochs = 150;
  int samples_per_epoch = 500000;
  int val_samples = 50000;
  int batch_size = 64;
  double learning_rate = 5e-5;
  double weight_decay = 0.01;
  int plateau_patience = 5;
  double plateau_factor = 0.5;
  double plateau_threshold = 1e-4;  // relative improvement required
  std::uint64_t seed = 1;
  int workers = 1;      // generation threads; 0 generates inline
  int grad_chunks = 8;  // fixed gradient partition, independent of threads
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

TrainConfig train_from_kv(const KeyValueConfig& kv, TrainConfig base = {});
KeyValueConfig train_to_kv(const TrainConfig& cfg);
const std::vector<std::string>& train_keys();
TrainConfig toy_train_config();

// One supervised example in the real token layout.
struct Sample {
  Mat truth;  // T x 2N
  Mat h0;     // T x 2N, scaled-pseudoinverse estimate
  double snr_db = 0.0;
  int num_paths = 0;
  int near_field_paths = 0;
};

// Draws channels, pilots and LS initial estimates for one scenario. With a
// fixed combiner every sample shares the operator built from the scenario's
// combiner seed; in per-sample mode each sample draws its own.
class SampleGenerator {
 public:
  explicit SampleGenerator(const ScenarioConfig& scenario);
  SampleGenerator(const ScenarioConfig& scenario, std::shared_ptr<const MeasurementOperator> op);

  const ScenarioConfig& scenario() const { return scenario_; }
  const MeasurementOperator& op() const { return *op_; }
  const LinearInitializer& initializer() const { return init_; }

  // SNR drawn uniformly from the scenario range unless given.
  Sample make(Rng& rng, std::optional<double> snr_db = std::nullopt) const;
  // Also returns the complex channel and measurement, for dataset export.
  Sample make(Rng& rng, std::optional<double> snr_db, ChannelRealization* channel, Observation* obs) const;

 private:
  ScenarioConfig scenario_;
  ArrayLayout layout_;
  std::shared_ptr<const MeasurementOperator> op_;
  LinearInitializer init_;
};

using Batch = std::vector<Sample>;

// Sample i of the batch uses its own stream seeded from one draw of `rng`,
// so successive calls yield disjoint samples.
Batch generate_batch(const SampleGenerator& gen, int count, Rng& rng);

// Sample `index` of a named split; independent of how work is scheduled.
Sample generate_indexed(const SampleGenerator& gen, std::uint64_t seed, std::uint64_t split, std::uint64_t index,
                        std::optional<double> snr_db = std::nullopt);
Batch generate_range(const SampleGenerator& gen, std::uint64_t seed, std::uint64_t split, std::uint64_t first,
                     int count, std::optional<double> snr_db = std::nullopt);

// Producer/consumer batch pipeline. Worker threads generate batches ahead of
// the consumer (at most `capacity` outstanding) and hand them over in index
// order, so the consumed sequence does not depend on the number of workers.
class BatchPipeline {
 public:
  BatchPipeline(const SampleGenerator& gen, std::uint64_t seed, std::uint64_t split, int num_batches, int batch_size,
                int workers, int capacity = 4);
  ~BatchPipeline();
  BatchPipeline(const BatchPipeline&) = delete;
  BatchPipeline& operator=(const BatchPipeline&) = delete;

  // Empty once all batches have been consumed.
  std::optional<Batch> next();

 private:
  void work();
  Batch build(int index) const;

  const SampleGenerator& gen_;
  std::uint64_t seed_, split_;
  int num_batches_, batch_size_, capacity_;
  std::mutex mu_;
  std::condition_variable produced_, consumed_;
  std::map<int, Batch> ready_;
  int next_claim_ = 0;
  int next_out_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
  std::vector<std::thread> threads_;
};

class AdamW {
 public:
  AdamW(const ad::ParamStore& store, double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);

  // Decoupled decay then the bias-corrected Adam step:
  //   p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)
  void step(ad::ParamStore& store, const ad::GradBuffer& grads);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  long long steps() const { return t_; }

 private:
  double lr_, wd_, b1_, b2_, eps_;
  long long t_ = 0;
  std::vector<Mat> m_, v_;
};

// Multiplies the learning rate by `factor` after `patience` consecutive
// epochs without a relative improvement of `threshold` in the monitored loss.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double threshold);

  // Returns true when the rate was reduced.
  bool step(double metric);
  double lr() const { return lr_; }
  int bad_epochs() const { return bad_; }

 private:
  double lr_, factor_, threshold_;
  int patience_;
  double best_;
  int bad_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_nmse_db = 0.0;
  double val_nmse_db = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double val_nmse = 0.0;     // linear, final epoch
  double ls_val_nmse = 0.0;  // LS on the same validation samples
};

struct TrainHooks {
  std::string nan_checkpoint;  // written with the last good weights on NaN
  KeyValueConfig checkpoint_config;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-sample NMSE loss summed over a batch and averaged. Gradients are
// accumulated over `chunks` fixed partitions reduced in order.
double batch_gradient(const BRTModel& model, const Batch& batch, int chunks, ad::GradBuffer& grads);

TrainResult train(BRTModel& model, const ScenarioConfig& scenario, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

// Continues training on a new scenario. A model with a different token count
// is rebuilt with resized(); the token width must match.
TrainResult fine_tune(BRTModel& model, const ScenarioConfig& scenario, const TrainConfig& cfg,
                      const TrainHooks& hooks = {});

std::string format_log_csv(const std::vector<EpochLog>& log);

// Final-iteration estimates for a set of samples.
std::vector<Mat> brt_estimates(const BRTModel& model, const Batch& samples,
                               kernels::Exec exec = kernels::Exec::Parallel);

}  // namespace hfbrt
