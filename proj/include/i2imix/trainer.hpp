/* Copyright (c) 2026 The i2imix Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "i2imix/checkpoint.hpp"
#include "i2imix/data.hpp"
#include "i2imix/losses.hpp"
#include "i2imix/networks.hpp"
#include "i2imix/selection.hpp"

namespace i2imix {

// Hybrid training loop: one joint generator update (adversarial + cycle +
// identity + paired L1 where available), then one update per discriminator
// with pool-supplied fakes, iterating a balanced epoch schedule with the
// piecewise-linear learning-rate decay.

/// Constant at lr_base for the first half of training, then linear to zero.
inline double lr_at_epoch(int epoch, int epochs_total, double lr_base) {
  if (epochs_total < 2 || epochs_total % 2 != 0)
    throw ConfigError("epochs_total must be even and >= 2");
  if (lr_base <= 0) throw ConfigError("lr_base must be positive");
  if (epoch < 0 || epoch > epochs_total)
    throw InvalidInputError("epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(epochs_total) + "]");
  const int half = epochs_total / 2;
  if (epoch <= half) return lr_base;
  return lr_base * static_cast<double>(epochs_total - epoch) / static_cast<double>(half);
}

/// Adam over a fixed parameter group. Moments are stored per tensor and
/// serialize into checkpoints so training resumes bit-exactly.
template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(NamedParams<T> params, double beta1 = 0.5, double beta2 = 0.999,
                double epsilon = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    for (const auto& [name, p] : params_) {
      m_.emplace_back(p->value.shape);
      v_.emplace_back(p->value.shape);
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p->zero_grad();
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<T>* p = params_[i].second;
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      for (std::size_t j = 0; j < p->value.numel(); ++j) {
        const double g = static_cast<double>(p->grad.data[j]);
        const double mj = beta1_ * m.data[j] + (1.0 - beta1_) * g;
        const double vj = beta2_ * v.data[j] + (1.0 - beta2_) * g * g;
        m.data[j] = static_cast<T>(mj);
        v.data[j] = static_cast<T>(vj);
        p->value.data[j] -= static_cast<T>(lr * (mj / bc1) / (std::sqrt(vj / bc2) + epsilon_));
      }
    }
  }

  std::int64_t steps() const { return t_; }
  const NamedParams<T>& params() const { return params_; }

  void save(Checkpoint& ck, const std::string& prefix) const {
    ck.meta[prefix + "_t"] = t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      ck.put(prefix + ".m." + params_[i].first, m_[i]);
      ck.put(prefix + ".v." + params_[i].first, v_[i]);
    }
  }

  void load(const Checkpoint& ck, const std::string& prefix) {
    t_ = ck.meta.at(prefix + "_t").get<std::int64_t>();
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i] = ck.get<T>(prefix + ".m." + params_[i].first);
      v_[i] = ck.get<T>(prefix + ".v." + params_[i].first);
    }
  }

 private:
  NamedParams<T> params_;
  double beta1_, beta2_, epsilon_;
  std::int64_t t_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

struct TrainingConfig {
  int epochs_total = 0;        // 0: derive from iteration_budget
  int iteration_budget = 1000; // used when epochs_total == 0
  double lr_base = 2e-4;
  LossWeights weights;
  int batch_size = 1;
  int pool_capacity = 50;
  std::uint64_t seed = 0;
  bool disable_cycle = false;     // ablation: w/o cycle (lambda2 -> 0)
  bool disable_identity = false;  // ablation: w/o idt (lambda3 -> 0)
  bool balanced = true;
  bool identity_every_batch = true;  // false: identity term on unpaired batches only
  int checkpoint_interval = 0;       // epochs; 0 = final checkpoint only
  AugmentConfig augment{72, 64};
  GeneratorConfig generator{3, 3, 8, 2, false};
  DiscriminatorConfig discriminator{3, 8, 2, true, false};

  void validate() const {
    if (batch_size != 1) throw ConfigError("only batch_size 1 is supported");
    if (lr_base <= 0) throw ConfigError("lr_base must be positive");
    if (pool_capacity < 0) throw ConfigError("pool_capacity must be >= 0");
    if (epochs_total != 0 && (epochs_total < 2 || epochs_total % 2 != 0))
      throw ConfigError("epochs_total must be even and >= 2");
    if (epochs_total == 0 && iteration_budget < 1)
      throw ConfigError("iteration_budget must be >= 1");
    weights.validate();
    augment.validate();
    generator.validate();
    discriminator.validate();
  }

  LossWeights effective_weights() const {
    LossWeights w = weights;
    if (disable_cycle) w.lambda2 = 0.0;
    if (disable_identity) w.lambda3 = 0.0;
    return w;
  }

  /// Nearest-or-next even epoch count matching the iteration budget.
  int resolve_epochs(std::size_t schedule_length) const {
    if (epochs_total != 0) return epochs_total;
    if (schedule_length == 0) throw ConfigError("empty schedule");
    int e = static_cast<int>(std::llround(static_cast<double>(iteration_budget) /
                                          static_cast<double>(schedule_length)));
    if (e < 2) e = 2;
    if (e % 2 != 0) ++e;
    return e;
  }

  static TrainingConfig paper_profile() {
    TrainingConfig c;
    c.augment = {286, 256};
    c.generator = {3, 3, 64, 9, false};
    c.discriminator = {3, 64, 3, true, false};
    return c;
  }

  static TrainingConfig desk_profile() { return TrainingConfig{}; }
};

inline void to_json(nlohmann::json& j, const TrainingConfig& c) {
  j = nlohmann::json{
      {"epochs_total", c.epochs_total},
      {"iteration_budget", c.iteration_budget},
      {"lr_base", c.lr_base},
      {"lambda1", c.weights.lambda1},
      {"lambda2", c.weights.lambda2},
      {"lambda3", c.weights.lambda3},
      {"lambda4", c.weights.lambda4},
      {"batch_size", c.batch_size},
      {"pool_capacity", c.pool_capacity},
      {"seed", c.seed},
      {"disable_cycle", c.disable_cycle},
      {"disable_identity", c.disable_identity},
      {"balanced", c.balanced},
      {"identity_every_batch", c.identity_every_batch},
      {"checkpoint_interval", c.checkpoint_interval},
      {"load_size", c.augment.load_size},
      {"crop_size", c.augment.crop_size},
      {"generator",
       {{"input_channels", c.generator.input_channels},
        {"output_channels", c.generator.output_channels},
        {"base_width", c.generator.base_width},
        {"n_residual_blocks", c.generator.n_residual_blocks},
        {"norm_affine", c.generator.norm_affine}}},
      {"discriminator",
       {{"input_channels", c.discriminator.input_channels},
        {"base_width", c.discriminator.base_width},
        {"n_layers", c.discriminator.n_layers},
        {"use_norm", c.discriminator.use_norm},
        {"norm_affine", c.discriminator.norm_affine}}}};
}

inline void from_json(const nlohmann::json& j, TrainingConfig& c) {
  c = TrainingConfig{};
  c.epochs_total = j.value("epochs_total", c.epochs_total);
  c.iteration_budget = j.value("iteration_budget", c.iteration_budget);
  c.lr_base = j.value("lr_base", c.lr_base);
  c.weights.lambda1 = j.value("lambda1", c.weights.lambda1);
  c.weights.lambda2 = j.value("lambda2", c.weights.lambda2);
  c.weights.lambda3 = j.value("lambda3", c.weights.lambda3);
  c.weights.lambda4 = j.value("lambda4", c.weights.lambda4);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.pool_capacity = j.value("pool_capacity", c.pool_capacity);
  c.seed = j.value("seed", c.seed);
  c.disable_cycle = j.value("disable_cycle", c.disable_cycle);
  c.disable_identity = j.value("disable_identity", c.disable_identity);
  c.balanced = j.value("balanced", c.balanced);
  c.identity_every_batch = j.value("identity_every_batch", c.identity_every_batch);
  c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
  c.augment.load_size = j.value("load_size", c.augment.load_size);
  c.augment.crop_size = j.value("crop_size", c.augment.crop_size);
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    c.generator.input_channels = g.value("input_channels", c.generator.input_channels);
    c.generator.output_channels = g.value("output_channels", c.generator.output_channels);
    c.generator.base_width = g.value("base_width", c.generator.base_width);
    c.generator.n_residual_blocks = g.value("n_residual_blocks", c.generator.n_residual_blocks);
    c.generator.norm_affine = g.value("norm_affine", c.generator.norm_affine);
  }
  if (j.contains("discriminator")) {
    const auto& d = j.at("discriminator");
    c.discriminator.input_channels = d.value("input_channels", c.discriminator.input_channels);
    c.discriminator.base_width = d.value("base_width", c.discriminator.base_width);
    c.discriminator.n_layers = d.value("n_layers", c.discriminator.n_layers);
    c.discriminator.use_norm = d.value("use_norm", c.discriminator.use_norm);
    c.discriminator.norm_affine = d.value("norm_affine", c.discriminator.norm_affine);
  }
}

/// One training batch: always both domains; paired batches carry aligned
/// ground truth.
template <typename T>
struct Batch {
  Tensor<T> x;
  Tensor<T> y;
  bool is_paired = false;
  std::string tag;  // sample id(s), for diagnostics
};

/// Everything the loop mutates: the four networks, their optimizers, the
/// two history pools and the step counters.
template <typename T>
struct TrainState {
  TrainingConfig config;
  ResnetGenerator<T> g_xy;
  ResnetGenerator<T> g_yx;
  PatchDiscriminator<T> d_x;
  PatchDiscriminator<T> d_y;
  AdamOptimizer<T> opt_g;
  AdamOptimizer<T> opt_dx;
  AdamOptimizer<T> opt_dy;
  ImagePool<T> pool_x;
  ImagePool<T> pool_y;
  std::int64_t step = 0;
  int epoch = 0;

  explicit TrainState(const TrainingConfig& cfg)
      : config(cfg),
        g_xy(cfg.generator, mix_seed(cfg.seed, fnv1a("init_g_xy"))),
        g_yx(cfg.generator, mix_seed(cfg.seed, fnv1a("init_g_yx"))),
        d_x(cfg.discriminator, mix_seed(cfg.seed, fnv1a("init_d_x"))),
        d_y(cfg.discriminator, mix_seed(cfg.seed, fnv1a("init_d_y"))),
        opt_g(joint_generator_params()),
        opt_dx(d_x.named_params("d_x")),
        opt_dy(d_y.named_params("d_y")),
        pool_x(static_cast<std::size_t>(cfg.pool_capacity)),
        pool_y(static_cast<std::size_t>(cfg.pool_capacity)) {}

  NamedParams<T> joint_generator_params() {
    NamedParams<T> out = g_xy.named_params("g_xy");
    NamedParams<T> yx = g_yx.named_params("g_yx");
    out.insert(out.end(), yx.begin(), yx.end());
    return out;
  }

  void save(const std::string& path, const nlohmann::json& extra_meta = {}) {
    Checkpoint ck;
    ck.meta["kind"] = "train_state";
    ck.meta["config"] = config;
    ck.meta["step"] = step;
    ck.meta["epoch"] = epoch;
    for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it)
      ck.meta[it.key()] = it.value();
    for (auto& [name, p] : opt_g.params()) ck.put(name, p->value);
    for (auto& [name, p] : opt_dx.params()) ck.put(name, p->value);
    for (auto& [name, p] : opt_dy.params()) ck.put(name, p->value);
    opt_g.save(ck, "adam_g");
    opt_dx.save(ck, "adam_dx");
    opt_dy.save(ck, "adam_dy");
    ck.meta["pool_x_size"] = pool_x.size();
    ck.meta["pool_y_size"] = pool_y.size();
    for (std::size_t i = 0; i < pool_x.size(); ++i)
      ck.put("pool_x." + std::to_string(i), pool_x.contents()[i]);
    for (std::size_t i = 0; i < pool_y.size(); ++i)
      ck.put("pool_y." + std::to_string(i), pool_y.contents()[i]);
    ck.save(path);
  }

  static TrainState restore(const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    if (ck.meta.value("kind", "") != "train_state")
      throw ConfigError("checkpoint is not a training state: " + path);
    TrainingConfig cfg = ck.meta.at("config").get<TrainingConfig>();
    TrainState st(cfg);
    st.step = ck.meta.at("step").get<std::int64_t>();
    st.epoch = ck.meta.at("epoch").get<int>();
    for (auto& [name, p] : st.opt_g.params()) p->value = ck.get<T>(name);
    for (auto& [name, p] : st.opt_dx.params()) p->value = ck.get<T>(name);
    for (auto& [name, p] : st.opt_dy.params()) p->value = ck.get<T>(name);
    st.opt_g.load(ck, "adam_g");
    st.opt_dx.load(ck, "adam_dx");
    st.opt_dy.load(ck, "adam_dy");
    std::vector<Tensor<T>> px, py;
    for (std::size_t i = 0; i < ck.meta.at("pool_x_size").get<std::size_t>(); ++i)
      px.push_back(ck.get<T>("pool_x." + std::to_string(i)));
    for (std::size_t i = 0; i < ck.meta.at("pool_y_size").get<std::size_t>(); ++i)
      py.push_back(ck.get<T>("pool_y." + std::to_string(i)));
    st.pool_x.restore(std::move(px));
    st.pool_y.restore(std::move(py));
    return st;
  }
};

/// Generator parameters G_XY from a checkpoint, for inference/eval.
template <typename T>
ResnetGenerator<T> load_generator_xy(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  TrainingConfig cfg = ck.meta.at("config").get<TrainingConfig>();
  ResnetGenerator<T> g(cfg.generator, 0);
  for (auto& [name, p] : g.named_params("g_xy")) p->value = ck.get<T>(name);
  return g;
}

/// One optimization step: joint generator update, then D_X, then D_Y.
/// Fakes reaching the discriminators go through the history pools; the
/// generator update uses the fresh fakes directly.
template <typename T>
LossReport train_step(TrainState<T>& state, const Batch<T>& batch, double lr, Rng& pool_rng_x,
                      Rng& pool_rng_y) {
  const LossWeights w = state.config.effective_weights();
  const bool use_cycle = !state.config.disable_cycle;
  const bool use_identity =
      !state.config.disable_identity &&
      (state.config.identity_every_batch || !batch.is_paired);

  LossReport report;
  report.is_paired = batch.is_paired;

  // ===== Generator update =====
  state.opt_g.zero_grad();

  Tape<T> tape_fy, tape_fx;
  const Tensor<T> fake_y = state.g_xy.forward(batch.x, tape_fy);
  const Tensor<T> fake_x = state.g_yx.forward(batch.y, tape_fx);

  Tensor<T> d_fake_y(fake_y.shape);  // dL/d fake_y, accumulated
  Tensor<T> d_fake_x(fake_x.shape);

  // Adversarial terms: the real logits contribute to the loss value but are
  // data as far as this update is concerned.
  {
    Tape<T> tape_dy;
    const Tensor<T> c_fake = state.d_y.forward(fake_y, tape_dy);
    const Tensor<T> c_real = state.d_y.infer(batch.y);
    Tensor<T> d_c_fake(c_fake.shape);
    report.gan_g += static_cast<double>(relativistic_g_loss_grad(
        c_real, c_fake, static_cast<Tensor<T>*>(nullptr), &d_c_fake, static_cast<T>(w.lambda1)));
    d_fake_y += state.d_y.backward(d_c_fake, tape_dy);
  }
  {
    Tape<T> tape_dx;
    const Tensor<T> c_fake = state.d_x.forward(fake_x, tape_dx);
    const Tensor<T> c_real = state.d_x.infer(batch.x);
    Tensor<T> d_c_fake(c_fake.shape);
    report.gan_g += static_cast<double>(relativistic_g_loss_grad(
        c_real, c_fake, static_cast<Tensor<T>*>(nullptr), &d_c_fake, static_cast<T>(w.lambda1)));
    d_fake_x += state.d_x.backward(d_c_fake, tape_dx);
  }

  // Cycle consistency: x -> fake_y -> cyc_x and y -> fake_x -> cyc_y.
  if (use_cycle) {
    Tape<T> tape_cx, tape_cy;
    const Tensor<T> cyc_x = state.g_yx.forward(fake_y, tape_cx);
    const Tensor<T> cyc_y = state.g_xy.forward(fake_x, tape_cy);
    Tensor<T> d_cyc_x(cyc_x.shape), d_cyc_y(cyc_y.shape);
    report.cycle += static_cast<double>(l1_mean_grad(cyc_x, batch.x, d_cyc_x,
                                                     static_cast<T>(w.lambda2)));
    report.cycle += static_cast<double>(l1_mean_grad(cyc_y, batch.y, d_cyc_y,
                                                     static_cast<T>(w.lambda2)));
    d_fake_y += state.g_yx.backward(d_cyc_x, tape_cx);
    d_fake_x += state.g_xy.backward(d_cyc_y, tape_cy);
  }

  // Identity mapping regularizer.
  if (use_identity) {
    Tape<T> tape_ix, tape_iy;
    const Tensor<T> idt_x = state.g_yx.forward(batch.x, tape_ix);
    const Tensor<T> idt_y = state.g_xy.forward(batch.y, tape_iy);
    Tensor<T> d_idt_x(idt_x.shape), d_idt_y(idt_y.shape);
    report.identity += static_cast<double>(l1_mean_grad(idt_x, batch.x, d_idt_x,
                                                        static_cast<T>(w.lambda3)));
    report.identity += static_cast<double>(l1_mean_grad(idt_y, batch.y, d_idt_y,
                                                        static_cast<T>(w.lambda3)));
    state.g_yx.backward(d_idt_x, tape_ix);
    state.g_xy.backward(d_idt_y, tape_iy);
  }

  // Paired reconstruction.
  if (batch.is_paired) {
    report.l1_paired += static_cast<double>(
        l1_mean_grad(fake_y, batch.y, d_fake_y, static_cast<T>(w.lambda4)));
    report.l1_paired += static_cast<double>(
        l1_mean_grad(fake_x, batch.x, d_fake_x, static_cast<T>(w.lambda4)));
  }

  state.g_xy.backward(d_fake_y, tape_fy);
  state.g_yx.backward(d_fake_x, tape_fx);

  // The discriminator tapes above also accumulated into D grads; those are
  // cleared before the discriminators' own updates below.
  state.opt_g.step(lr);

  // ===== Discriminator updates (fresh reals, pool-supplied fakes) =====
  {
    state.opt_dx.zero_grad();
    const Tensor<T> pool_fake = state.pool_x.query(fake_x, pool_rng_x);
    Tape<T> tape_real, tape_fake;
    const Tensor<T> c_real = state.d_x.forward(batch.x, tape_real);
    const Tensor<T> c_fake = state.d_x.forward(pool_fake, tape_fake);
    Tensor<T> d_real(c_real.shape), d_fake(c_fake.shape);
    report.gan_d += static_cast<double>(
        relativistic_d_loss_grad(c_real, c_fake, &d_real, &d_fake, T(1)));
    state.d_x.backward(d_fake, tape_fake);
    state.d_x.backward(d_real, tape_real);
    state.opt_dx.step(lr);
  }
  {
    state.opt_dy.zero_grad();
    const Tensor<T> pool_fake = state.pool_y.query(fake_y, pool_rng_y);
    Tape<T> tape_real, tape_fake;
    const Tensor<T> c_real = state.d_y.forward(batch.y, tape_real);
    const Tensor<T> c_fake = state.d_y.forward(pool_fake, tape_fake);
    Tensor<T> d_real(c_real.shape), d_fake(c_fake.shape);
    report.gan_d += static_cast<double>(
        relativistic_d_loss_grad(c_real, c_fake, &d_real, &d_fake, T(1)));
    state.d_y.backward(d_fake, tape_fake);
    state.d_y.backward(d_real, tape_real);
    state.opt_dy.step(lr);
  }

  // The grad helpers return raw (unweighted) loss values; only the gradients
  // carry the lambda scaling.
  report.total = total_generator_loss(report.gan_g, report.cycle, report.identity,
                                      report.l1_paired, w, report.is_paired);

  ++state.step;
  if (!report.all_finite())
    throw RuntimeFailure("non-finite loss at step " + std::to_string(state.step) + " (" +
                         batch.tag + "): gan_g=" + std::to_string(report.gan_g) +
                         " gan_d=" + std::to_string(report.gan_d) +
                         " cycle=" + std::to_string(report.cycle) +
                         " identity=" + std::to_string(report.identity) +
                         " l1_paired=" + std::to_string(report.l1_paired));
  return report;
}

// ---------------------------------------------------------------------------
// Full training loop

struct TrainResult {
  std::string final_checkpoint;
  std::string log_path;
  LossReport last_report;
  int epochs_run = 0;
  std::int64_t steps_run = 0;
};

namespace detail {

template <typename T>
Batch<T> make_batch(const DatasetManifest& manifest, const BatchDesc& desc,
                    const AugmentConfig& aug, Rng& rng) {
  Batch<T> batch;
  batch.is_paired = desc.paired;
  const AugmentParams params = AugmentParams::sample(aug, rng);
  if (desc.paired) {
    const PairedEntry& e = manifest.paired_by_id(desc.pair_id);
    batch.tag = e.id;
    batch.x = apply_augment(load_image<T>(manifest.resolve(e.path_x)), aug, params, Domain::X);
    batch.y = apply_augment(load_image<T>(manifest.resolve(e.path_y)), aug, params, Domain::Y);
  } else {
    const UnpairedEntry* ex = nullptr;
    const UnpairedEntry* ey = nullptr;
    for (const auto& u : manifest.unpaired_x)
      if (u.id == desc.x_id) ex = &u;
    for (const auto& u : manifest.unpaired_y)
      if (u.id == desc.y_id) ey = &u;
    if (!ex || !ey) throw InvalidInputError("schedule references unknown unpaired ids");
    batch.tag = ex->id + "+" + ey->id;
    // Unpaired images are independent draws; they get independent crops.
    batch.x = apply_augment(load_image<T>(manifest.resolve(ex->path)), aug, params, Domain::X);
    const AugmentParams params_y = AugmentParams::sample(aug, rng);
    batch.y = apply_augment(load_image<T>(manifest.resolve(ey->path)), aug, params_y, Domain::Y);
  }
  return batch;
}

}  // namespace detail

/// Filter the manifest down to the paired samples named by the selection
/// (all of them when no selection is given).
inline DatasetManifest apply_selection(const DatasetManifest& manifest,
                                       const std::optional<SelectionResult>& selection) {
  if (!selection) return manifest;
  DatasetManifest out = manifest;
  out.paired.clear();
  for (const auto& id : selection->ids()) out.paired.push_back(manifest.paired_by_id(id));
  return out;
}

/// Runs the full schedule-driven loop, writing a per-iteration CSV log and
/// periodic + final checkpoints under out_dir. Deterministic given the
/// config seed. Pass a TrainState restored from a checkpoint to resume.
template <typename T = float>
TrainResult train(const TrainingConfig& config, const DatasetManifest& manifest,
                  const std::optional<SelectionResult>& selection, const std::string& out_dir,
                  TrainState<T>* resume_state = nullptr,
                  const std::function<void(int, const LossReport&)>& epoch_callback = {}) {
  config.validate();
  const DatasetManifest active = apply_selection(manifest, selection);
  if (active.empty()) throw InvalidInputError("training dataset is empty");
  active.validate_files();  // fail fast before epoch 0

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  // Schedule length is stable across epochs; fix the epoch count up front.
  const std::size_t schedule_len =
      build_epoch_schedule(active, mix_seed(config.seed, fnv1a("schedule"), 0), config.balanced)
          .entries.size();
  const int epochs_total = config.resolve_epochs(schedule_len);

  std::unique_ptr<TrainState<T>> owned;
  TrainState<T>* state = resume_state;
  if (!state) {
    owned = std::make_unique<TrainState<T>>(config);
    state = owned.get();
  }

  const LossWeights w = config.effective_weights();
  nlohmann::json run_meta = {{"epochs_total", epochs_total},
                             {"schedule_length", schedule_len},
                             {"n_paired", active.paired.size()},
                             {"n_unpaired_x", active.unpaired_x.size()},
                             {"n_unpaired_y", active.unpaired_y.size()}};
  {
    nlohmann::json resolved;
    to_json(resolved, config);
    resolved["resolved_epochs_total"] = epochs_total;
    std::ofstream cfg_out(fs::path(out_dir) / "train_config.json", std::ios::trunc);
    cfg_out << resolved.dump(2) << "\n";
  }

  const std::string log_path = (fs::path(out_dir) / "train_log.csv").string();
  std::ofstream log(log_path, state->step > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot open training log: " + log_path);
  if (state->step == 0) {
    char header[256];
    std::snprintf(header, sizeof(header),
                  "# lambda1=%g lambda2=%g lambda3=%g lambda4=%g seed=%llu balanced=%d\n",
                  w.lambda1, w.lambda2, w.lambda3, w.lambda4,
                  static_cast<unsigned long long>(config.seed), config.balanced ? 1 : 0);
    log << header;
    log << "step,epoch,is_paired,gan_g,gan_d,cycle,identity,l1_paired,total\n";
  }

  TrainResult result;
  result.log_path = log_path;

  for (int epoch = state->epoch; epoch < epochs_total; ++epoch) {
    const double lr = lr_at_epoch(epoch, epochs_total, config.lr_base);
    const EpochSchedule schedule = build_epoch_schedule(
        active, mix_seed(config.seed, fnv1a("schedule"), static_cast<std::uint64_t>(epoch)),
        config.balanced);

    for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
      Rng aug_rng(mix_seed(config.seed, fnv1a("augment"), static_cast<std::uint64_t>(epoch),
                           static_cast<std::uint64_t>(i)));
      const Batch<T> batch =
          detail::make_batch<T>(active, schedule.entries[i], config.augment, aug_rng);
      Rng pool_rng_x(mix_seed(config.seed, fnv1a("pool_x"),
                              static_cast<std::uint64_t>(state->step)));
      Rng pool_rng_y(mix_seed(config.seed, fnv1a("pool_y"),
                              static_cast<std::uint64_t>(state->step)));
      const LossReport report = train_step(*state, batch, lr, pool_rng_x, pool_rng_y);

      char row[512];
      std::snprintf(row, sizeof(row), "%lld,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(state->step - 1), epoch, report.is_paired ? 1 : 0,
                    report.gan_g, report.gan_d, report.cycle, report.identity, report.l1_paired,
                    report.total);
      log << row;
      result.last_report = report;
      ++result.steps_run;
    }
    log.flush();
    state->epoch = epoch + 1;
    ++result.epochs_run;

    if (config.checkpoint_interval > 0 && state->epoch % config.checkpoint_interval == 0 &&
        state->epoch < epochs_total) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch%04d.ckpt", state->epoch);
      state->save((fs::path(out_dir) / name).string(), run_meta);
    }
    if (epoch_callback) epoch_callback(epoch, result.last_report);
  }

  result.final_checkpoint = (fs::path(out_dir) / "model_final.ckpt").string();
  state->save(result.final_checkpoint, run_meta);
  return result;
}

}  // namespace i2imix
