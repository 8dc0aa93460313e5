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

#include "hfbrt/training.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "hfbrt/checkpoint.hpp"

namespace hfbrt {

namespace {

constexpr std::uint64_t kValSplit = 2;
constexpr std::uint64_t train_split(int epoch) { return (static_cast<std::uint64_t>(epoch) << 4) | 1; }

bool all_finite(const ad::GradBuffer& g) {
  for (const auto& m : g)
    if (!m.allFinite()) return false;
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (samples_per_epoch < batch_size) throw ConfigError("samples_per_epoch must be >= batch_size");
  if (val_samples < 1) throw ConfigError("val_samples must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (plateau_patience < 0) throw ConfigError("plateau_patience must be >= 0");
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) throw ConfigError("plateau_factor must lie in (0, 1]");
  if (!(plateau_threshold >= 0.0)) throw ConfigError("plateau_threshold must be >= 0");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (grad_chunks < 1) throw ConfigError("grad_chunks must be >= 1");
}

const std::vector<std::string>& train_keys() {
  static const std::vector<std::string> keys = {
      "epochs",         "samples_per_epoch", "val_samples",      "batch_size",
      "learning_rate",  "weight_decay",      "plateau_patience", "plateau_factor",
      "plateau_threshold", "seed",           "workers",          "grad_chunks"};
  return keys;
}

TrainConfig train_from_kv(const KeyValueConfig& kv, TrainConfig c) {
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.samples_per_epoch = static_cast<int>(kv.get_int("samples_per_epoch", c.samples_per_epoch));
  c.val_samples = static_cast<int>(kv.get_int("val_samples", c.val_samples));
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.plateau_patience = static_cast<int>(kv.get_int("plateau_patience", c.plateau_patience));
  c.plateau_factor = kv.get_double("plateau_factor", c.plateau_factor);
  c.plateau_threshold = kv.get_double("plateau_threshold", c.plateau_threshold);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.workers = static_cast<int>(kv.get_int("workers", c.workers));
  c.grad_chunks = static_cast<int>(kv.get_int("grad_chunks", c.grad_chunks));
  c.validate();
  return c;
}

KeyValueConfig train_to_kv(const TrainConfig& c) {
  KeyValueConfig kv;
  kv.set("epochs", std::to_string(c.epochs));
  kv.set("samples_per_epoch", std::to_string(c.samples_per_epoch));
  kv.set("val_samples", std::to_string(c.val_samples));
  kv.set("batch_size", std::to_string(c.batch_size));
  kv.set("learning_rate", format_double(c.learning_rate));
  kv.set("weight_decay", format_double(c.weight_decay));
  kv.set("plateau_patience", std::to_string(c.plateau_patience));
  kv.set("plateau_factor", format_double(c.plateau_factor));
  kv.set("plateau_threshold", format_double(c.plateau_threshold));
  kv.set("seed", std::to_string(c.seed));
  kv.set("workers", std::to_string(c.workers));
  kv.set("grad_chunks", std::to_string(c.grad_chunks));
  return kv;
}

TrainConfig toy_train_config() {
  TrainConfig c;
  c.epochs = 30;
  c.samples_per_epoch = 200;
  c.val_samples = 256;
  c.batch_size = 16;
  c.learning_rate = 1e-3;
  return c;
}

// ---------------------------------------------------------------- samples

SampleGenerator::SampleGenerator(const ScenarioConfig& scenario)
    : SampleGenerator(scenario, std::make_shared<const MeasurementOperator>(MeasurementOperator::from_seed(
                                    scenario.array, scenario.n_pilots, scenario.combiner_seed))) {}

SampleGenerator::SampleGenerator(const ScenarioConfig& scenario, std::shared_ptr<const MeasurementOperator> op)
    : scenario_(scenario), layout_(scenario.array), op_(std::move(op)) {
  scenario_.validate();
  if (op_->num_elements() != scenario_.num_elements() || op_->n_pilots() != scenario_.n_pilots)
    throw ShapeError("measurement operator does not match the scenario");
  init_ = build_initializer(*op_);
}

Sample SampleGenerator::make(Rng& rng, std::optional<double> snr_db) const {
  return make(rng, snr_db, nullptr, nullptr);
}

Sample SampleGenerator::make(Rng& rng, std::optional<double> snr_db, ChannelRealization* channel,
                             Observation* observation) const {
  const PathSet paths = sample_paths(scenario_, rng);
  ChannelRealization ch = realize_channel(paths, scenario_, layout_);
  double snr = 0.0;
  if (snr_db) {
    snr = *snr_db;
  } else {
    std::uniform_real_distribution<double> u(scenario_.snr_min_db, scenario_.snr_max_db);
    snr = scenario_.snr_min_db == scenario_.snr_max_db ? scenario_.snr_min_db : u(rng);
  }
  Sample s;
  s.snr_db = snr;
  s.num_paths = paths.size();
  s.near_field_paths = ch.near_field_paths;
  s.truth = complex_rows_to_real(ch.h);
  if (scenario_.per_sample_combiner) {
    const auto op = MeasurementOperator::generate(scenario_.array, scenario_.n_pilots, rng);
    const Observation obs = observe(ch, op, snr, rng);
    s.h0 = ls_estimate(obs, build_initializer(op));
    if (observation) *observation = obs;
  } else {
    const Observation obs = observe(ch, *op_, snr, rng);
    s.h0 = ls_estimate(obs, init_);
    if (observation) *observation = obs;
  }
  if (channel) *channel = std::move(ch);
  return s;
}

Batch generate_batch(const SampleGenerator& gen, int count, Rng& rng) {
  Batch out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng local = make_stream(rng(), 0x5A);
    out.push_back(gen.make(local));
  }
  return out;
}

Sample generate_indexed(const SampleGenerator& gen, std::uint64_t seed, std::uint64_t split, std::uint64_t index,
                        std::optional<double> snr_db) {
  Rng rng = make_stream(seed, split, index, 0x5A);
  return gen.make(rng, snr_db);
}

Batch generate_range(const SampleGenerator& gen, std::uint64_t seed, std::uint64_t split, std::uint64_t first,
                     int count, std::optional<double> snr_db) {
  Batch out(count);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) out[i] = generate_indexed(gen, seed, split, first + i, snr_db);
  return out;
}

// --------------------------------------------------------------- pipeline

BatchPipeline::BatchPipeline(const SampleGenerator& gen, std::uint64_t seed, std::uint64_t split, int num_batches,
                             int batch_size, int workers, int capacity)
    : gen_(gen), seed_(seed), split_(split), num_batches_(num_batches), batch_size_(batch_size),
      capacity_(std::max(1, capacity)) {
  for (int w = 0; w < workers; ++w) threads_.emplace_back([this] { work(); });
}

BatchPipeline::~BatchPipeline() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stop_ = true;
  }
  consumed_.notify_all();
  for (auto& t : threads_) t.join();
}

Batch BatchPipeline::build(int index) const {
  Batch b;
  b.reserve(batch_size_);
  for (int i = 0; i < batch_size_; ++i)
    b.push_back(generate_indexed(gen_, seed_, split_, static_cast<std::uint64_t>(index) * batch_size_ + i));
  return b;
}

void BatchPipeline::work() {
  for (;;) {
    int index;
    {
      std::unique_lock<std::mutex> lock(mu_);
      consumed_.wait(lock, [&] { return stop_ || next_claim_ >= num_batches_ || next_claim_ < next_out_ + capacity_; });
      if (stop_ || next_claim_ >= num_batches_) return;
      index = next_claim_++;
    }
    try {
      Batch b = build(index);
      std::lock_guard<std::mutex> lock(mu_);
      ready_.emplace(index, std::move(b));
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      if (!error_) error_ = std::current_exception();
    }
    produced_.notify_all();
  }
}

std::optional<Batch> BatchPipeline::next() {
  if (next_out_ >= num_batches_) return std::nullopt;
  if (threads_.empty()) return build(next_out_++);
  std::unique_lock<std::mutex> lock(mu_);
  produced_.wait(lock, [&] { return error_ || ready_.count(next_out_) != 0; });
  if (error_) std::rethrow_exception(error_);
  auto node = ready_.extract(next_out_);
  ++next_out_;
  lock.unlock();
  consumed_.notify_all();
  return std::move(node.mapped());
}

// -------------------------------------------------------------- optimizer

AdamW::AdamW(const ad::ParamStore& store, double lr, double weight_decay, double beta1, double beta2, double eps)
    : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
  m_ = store.zero_grads();
  v_ = store.zero_grads();
}

void AdamW::step(ad::ParamStore& store, const ad::GradBuffer& grads) {
  if (static_cast<int>(grads.size()) != store.size()) throw ShapeError("AdamW: gradient buffer size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (int i = 0; i < store.size(); ++i) {
    Mat& p = store.value(i);
    const Mat& g = grads[i];
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseProduct(g);
    p *= 1.0 - lr_ * wd_;
    p.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

PlateauScheduler::PlateauScheduler(double lr, double factor, int patience, double threshold)
    : lr_(lr), factor_(factor), threshold_(threshold), patience_(patience),
      best_(std::numeric_limits<double>::infinity()) {}

bool PlateauScheduler::step(double metric) {
  if (metric < best_ * (1.0 - threshold_)) {
    best_ = metric;
    bad_ = 0;
    return false;
  }
  if (++bad_ >= patience_) {
    lr_ *= factor_;
    bad_ = 0;
    return true;
  }
  return false;
}

// --------------------------------------------------------------- training

double batch_gradient(const BRTModel& model, const Batch& batch, int chunks, ad::GradBuffer& grads) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw std::invalid_argument("empty batch");
  chunks = std::min(chunks, B);
  std::vector<ad::GradBuffer> parts(chunks);
  std::vector<double> losses(chunks, 0.0);
  std::vector<char> nan(chunks, 0);
#pragma omp parallel for schedule(static, 1)
  for (int c = 0; c < chunks; ++c) {
    parts[c] = model.params().zero_grads();
    const int lo = c * B / chunks, hi = (c + 1) * B / chunks;
    for (int i = lo; i < hi; ++i) {
      ad::Graph g;
      const auto trace = brt::refine(g, model, g.constant(batch[i].h0));
      const ad::Var loss = brt::nmse_loss(g, trace.back(), batch[i].truth);
      g.backward(ad::scale(loss, 1.0 / B), parts[c]);
      losses[c] += loss.value()(0, 0);
      if (g.saw_nan()) nan[c] = 1;
    }
  }
  grads = model.params().zero_grads();
  double total = 0.0;
  bool saw_nan = false;
  for (int c = 0; c < chunks; ++c) {
    for (std::size_t j = 0; j < grads.size(); ++j) grads[j] += parts[c][j];
    total += losses[c];
    saw_nan = saw_nan || nan[c];
  }
  const double mean = total / B;
  return saw_nan ? std::numeric_limits<double>::quiet_NaN() : mean;
}

std::vector<Mat> brt_estimates(const BRTModel& model, const Batch& samples, kernels::Exec exec) {
  constexpr std::size_t kGroup = 256;
  kernels::BatchedBRT<double> net(model);
  std::vector<Mat> out;
  out.reserve(samples.size());
  for (std::size_t lo = 0; lo < samples.size(); lo += kGroup) {
    const std::size_t hi = std::min(samples.size(), lo + kGroup);
    std::vector<Mat> h0;
    for (std::size_t i = lo; i < hi; ++i) h0.push_back(samples[i].h0);
    for (auto& e : net.refine(h0, exec)) out.push_back(std::move(e));
  }
  return out;
}

namespace {

void check_compatible(const BRTModel& model, const ScenarioConfig& scenario) {
  const auto& hp = model.hyper();
  if (hp.token_width != scenario.token_width())
    throw ShapeError("model token width " + std::to_string(hp.token_width) + " does not match the scenario (" +
                     std::to_string(scenario.token_width()) + ")");
  if (hp.tokens != scenario.subcarriers)
    throw ShapeError("model expects " + std::to_string(hp.tokens) + " tokens, scenario has " +
                     std::to_string(scenario.subcarriers) + " subcarriers");
}

double mean_sample_nmse(const Batch& samples, const std::vector<Mat>& est) {
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) acc += nmse(samples[i].truth, est[i]);
  return acc / static_cast<double>(samples.size());
}

}  // namespace

TrainResult train(BRTModel& model, const ScenarioConfig& scenario, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  check_compatible(model, scenario);
  const SampleGenerator gen(scenario);
  const Batch val = generate_range(gen, cfg.seed, kValSplit, 0, cfg.val_samples);
  std::vector<Mat> ls;
  for (const auto& s : val) ls.push_back(s.h0);

  TrainResult result;
  result.ls_val_nmse = mean_sample_nmse(val, ls);
  result.val_nmse = mean_sample_nmse(val, brt_estimates(model, val));

  AdamW opt(model.params(), cfg.learning_rate, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.adam_eps);
  PlateauScheduler sched(cfg.learning_rate, cfg.plateau_factor, cfg.plateau_patience, cfg.plateau_threshold);
  const int num_batches = cfg.samples_per_epoch / cfg.batch_size;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    BatchPipeline pipe(gen, cfg.seed, train_split(epoch), num_batches, cfg.batch_size, cfg.workers);
    double train_acc = 0.0;
    ad::GradBuffer grads;
    while (auto batch = pipe.next()) {
      const double loss = batch_gradient(model, *batch, cfg.grad_chunks, grads);
      if (!std::isfinite(loss) || !all_finite(grads)) {
        if (!hooks.nan_checkpoint.empty()) save_checkpoint(hooks.nan_checkpoint, model, hooks.checkpoint_config);
        throw TrainingDiverged("non-finite loss or gradient in epoch " + std::to_string(epoch) +
                               (hooks.nan_checkpoint.empty() ? std::string()
                                                             : "; last good weights saved to " + hooks.nan_checkpoint));
      }
      opt.step(model.params(), grads);
      train_acc += loss;
    }
    result.val_nmse = mean_sample_nmse(val, brt_estimates(model, val));
    EpochLog row{epoch, to_db(train_acc / num_batches), to_db(result.val_nmse), opt.lr()};
    result.log.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);
    sched.step(result.val_nmse);
    opt.set_lr(sched.lr());
  }
  return result;
}

TrainResult fine_tune(BRTModel& model, const ScenarioConfig& scenario, const TrainConfig& cfg,
                      const TrainHooks& hooks) {
  if (model.hyper().token_width != scenario.token_width())
    throw ShapeError("fine-tuning requires the same array size as the pretrained model");
  if (model.hyper().tokens != scenario.subcarriers) model = model.resized(scenario.subcarriers);
  return train(model, scenario, cfg, hooks);
}

std::string format_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,train_nmse_db,val_nmse_db,lr\n";
  for (const auto& r : log)
    os << r.epoch << ',' << format_double(r.train_nmse_db) << ',' << format_double(r.val_nmse_db) << ','
       << format_double(r.lr) << '\n';
  return os.str();
}

}  // namespace hfbrt
