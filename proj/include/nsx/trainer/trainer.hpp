// Copyright 2026 The nsx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NSX_TRAINER_TRAINER_HPP_
#define NSX_TRAINER_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsx/ad/audio.hpp"
#include "nsx/core/wav.hpp"
#include "nsx/mixer/mixer.hpp"
#include "nsx/model/model.hpp"
#include "nsx/signal/metrics.hpp"
#include "nsx/signal/stft.hpp"

namespace nsx {

struct TrainConfig {
  int batch_size = 16;
  double lr = 0.001;
  int max_epochs = 100;
  int patience = 5;
  double gamma = 0.1;       // weight on the classification term
  double weight_decay = 0.01;
  double clip_norm = 5.0;
  uint64_t seed = 1;
  std::string device = "cpu";

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("trainer: batch_size must be positive");
    if (lr <= 0.0) throw std::invalid_argument("trainer: lr must be positive");
    if (max_epochs < 1) throw std::invalid_argument("trainer: max_epochs must be positive");
    if (patience < 0) throw std::invalid_argument("trainer: patience must be nonnegative");
    if (gamma < 0.0) throw std::invalid_argument("trainer: gamma must be nonnegative");
    if (clip_norm <= 0.0) throw std::invalid_argument("trainer: clip_norm must be positive");
  }
};

inline nlohmann::json train_config_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size}, {"lr", c.lr},
          {"max_epochs", c.max_epochs}, {"patience", c.patience},
          {"gamma", c.gamma},           {"weight_decay", c.weight_decay},
          {"clip_norm", c.clip_norm},   {"seed", c.seed},
          {"device", c.device}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.gamma = j.value("gamma", c.gamma);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.device = j.value("device", c.device);
  return c;
}

// Cosine annealing from lr down to lr/100 across the epoch budget.
inline double cosine_lr(double lr, int epoch, int max_epochs) {
  double floor = lr / 100.0;
  if (epoch >= max_epochs) return floor;
  double phase = M_PI * static_cast<double>(epoch) / static_cast<double>(max_epochs);
  return floor + 0.5 * (lr - floor) * (1.0 + std::cos(phase));
}

// Distortion term on the reconstructed waveform plus gamma-weighted
// cross-entropy summed over the per-block logits. With no logits (speaker
// encoder ablated) the classification term vanishes.
template <typename S>
int multitask_loss(ad::Graph<S>& g, const ModelOutput<S>& out, const std::vector<S>& target,
                   int label, double gamma, const StftConfig& scfg = {}) {
  int est = ad::istft_op(g, out.spec, static_cast<int64_t>(target.size()), scfg);
  int loss = ad::si_sdr_loss(g, est, target);
  if (out.logits.empty() || gamma == 0.0) return loss;
  if (label < 0 || label >= g.val(out.logits.front()).size())
    throw std::out_of_range("multitask_loss: speaker label out of range");
  int ce = ad::cross_entropy(g, out.logits.front(), label);
  for (size_t c = 1; c < out.logits.size(); ++c)
    ce = ad::add(g, ce, ad::cross_entropy(g, out.logits[c], label));
  return ad::add(g, loss, ad::scale(g, ce, static_cast<S>(gamma)));
}

// Decoupled weight decay Adam. Moments live in AdamState so checkpoints can
// carry them across restarts.
class AdamW {
 public:
  AdamW(ad::ParamStore<float>& ps, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : ps_(&ps), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
    st_.step = 0;
    for (int i = 0; i < ps.size(); ++i) {
      st_.m.emplace_back(static_cast<size_t>(ps.at(i).value.size()), 0.0f);
      st_.v.emplace_back(static_cast<size_t>(ps.at(i).value.size()), 0.0f);
    }
  }

  const AdamState& state() const { return st_; }

  void load_state(AdamState st) {
    if (st.m.size() != static_cast<size_t>(ps_->size()))
      throw std::invalid_argument("adamw: state size mismatch");
    st_ = std::move(st);
  }

  void step(double lr) {
    st_.step += 1;
    double bc1 = 1.0 - std::pow(b1_, static_cast<double>(st_.step));
    double bc2 = 1.0 - std::pow(b2_, static_cast<double>(st_.step));
    for (int i = 0; i < ps_->size(); ++i) {
      auto& p = ps_->at(i);
      float* val = p.value.data();
      const float* grad = p.grad.data();
      float* m = st_.m[static_cast<size_t>(i)].data();
      float* v = st_.v[static_cast<size_t>(i)].data();
      for (int64_t k = 0; k < p.value.size(); ++k) {
        double gk = grad[k];
        double mk = b1_ * m[k] + (1.0 - b1_) * gk;
        double vk = b2_ * v[k] + (1.0 - b2_) * gk * gk;
        m[k] = static_cast<float>(mk);
        v[k] = static_cast<float>(vk);
        double update = (mk / bc1) / (std::sqrt(vk / bc2) + eps_) + wd_ * val[k];
        val[k] = static_cast<float>(val[k] - lr * update);
      }
    }
  }

 private:
  ad::ParamStore<float>* ps_;
  AdamState st_;
  double wd_, b1_, b2_, eps_;
};

// Rescales all gradients so their global L2 norm does not exceed max_norm.
// Returns the pre-clip norm and whether clipping fired.
inline std::pair<double, bool> clip_grad_norm(ad::ParamStore<float>& ps, double max_norm) {
  double sq = 0.0;
  for (int i = 0; i < ps.size(); ++i) {
    const auto& g = ps.at(i).grad;
    for (int64_t k = 0; k < g.size(); ++k) sq += static_cast<double>(g[k]) * g[k];
  }
  double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return {norm, false};
  float s = static_cast<float>(max_norm / norm);
  for (int i = 0; i < ps.size(); ++i) {
    auto& g = ps.at(i).grad;
    for (int64_t k = 0; k < g.size(); ++k) g[k] *= s;
  }
  return {norm, true};
}

// Stop once `patience` whole epochs have passed beyond the best one.
struct EarlyStop {
  int patience = 5;
  double best = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;

  // feeds one epoch's metric; true means training should halt
  bool update(int epoch, double metric) {
    if (metric > best) {
      best = metric;
      best_epoch = epoch;
      return false;
    }
    return epoch - best_epoch > patience;
  }
};

struct SampleData {
  Tensor<float> spec;            // [2, F, T]
  std::vector<float> mixture;
  std::vector<float> target;
  int label = -1;
};

inline SampleData load_sample(const DatasetEntry& e, const StftConfig& scfg = {}) {
  WavData mix = read_wav(e.mixture_path);
  WavData tgt = read_wav(e.target_path);
  if (mix.samples.size() != tgt.samples.size())
    throw std::runtime_error("sample " + e.sample_id + ": mixture/target length mismatch");
  SampleData s;
  s.spec = stft(mix.samples, scfg).ri;
  s.mixture = std::move(mix.samples);
  s.target = std::move(tgt.samples);
  s.label = e.target_speaker_label;
  return s;
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_sisdr = 0.0;
  double lr = 0.0;
  int clip_events = 0;
};

inline nlohmann::json epoch_record_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_loss", r.train_loss},
          {"dev_sisdr", r.dev_sisdr},
          {"lr", r.lr},
          {"clip_events", r.clip_events}};
}

struct FitResult {
  std::vector<EpochRecord> history;
  double best_dev_sisdr = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int epochs_run = 0;
  bool early_stopped = false;
  std::string best_path;
  std::string last_path;
  std::string history_path;
};

// Mean SI-SDR of the model's reconstructions over a manifest slice. Pure.
inline double mean_dev_sisdr(Model<float>& model, const std::vector<DatasetEntry>& entries,
                             const StftConfig& scfg = {}) {
  if (entries.empty()) throw std::invalid_argument("mean_dev_sisdr: empty set");
  double acc = 0.0;
  for (const auto& e : entries) {
    SampleData s = load_sample(e, scfg);
    ad::Graph<float> g;
    auto out = model.forward(g, g.leaf(std::move(s.spec)));
    ComplexSpectrogram pred{g.val(out.spec).clone(), scfg};
    std::vector<float> est = istft(pred, static_cast<int64_t>(s.target.size()));
    acc += si_sdr(est, s.target);
  }
  return acc / static_cast<double>(entries.size());
}

// AdamW + cosine annealing with gradient accumulation over each batch,
// global-norm clipping, dev-metric early stopping, and best/last
// checkpoints. History goes to out_dir/history.jsonl, one JSON per epoch.
inline FitResult fit(Model<float>& model, const std::vector<DatasetEntry>& train,
                     const std::vector<DatasetEntry>& dev, const TrainConfig& cfg,
                     const std::string& out_dir, const StftConfig& scfg = {},
                     const std::function<void(const EpochRecord&)>& on_epoch = nullptr) {
  cfg.validate();
  if (train.empty() || dev.empty()) throw std::invalid_argument("fit: empty dataset");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  FitResult res;
  res.best_path = (fs::path(out_dir) / "best.ckpt").string();
  res.last_path = (fs::path(out_dir) / "last.ckpt").string();
  res.history_path = (fs::path(out_dir) / "history.jsonl").string();
  std::ofstream hist(res.history_path, std::ios::trunc);
  if (!hist) throw std::runtime_error("fit: cannot write " + res.history_path);

  auto& ps = model.params();
  AdamW opt(ps, cfg.weight_decay);
  EarlyStop stopper{cfg.patience};
  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    double lr = cosine_lr(cfg.lr, epoch, cfg.max_epochs);
    Rng shuffle_rng(splitmix64(cfg.seed ^ (0x5E7A1ULL + static_cast<uint64_t>(epoch))));
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(shuffle_rng.uniform_int(static_cast<int64_t>(i)));
      std::swap(order[i - 1], order[j]);
    }

    double loss_acc = 0.0;
    int64_t seen = 0;
    int clip_events = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      ps.zero_grad();
      double batch_loss = 0.0;
      for (size_t bi = start; bi < stop; ++bi) {
        SampleData s = load_sample(train[order[bi]], scfg);
        ad::Graph<float> g;
        auto out = model.forward(g, g.leaf(std::move(s.spec)));
        int loss = multitask_loss(g, out, s.target, s.label, cfg.gamma, scfg);
        batch_loss += g.val(loss)[0];
        g.backward(loss);
      }
      double n = static_cast<double>(stop - start);
      batch_loss /= n;
      if (!std::isfinite(batch_loss)) {
        save_checkpoint((fs::path(out_dir) / "diverged.ckpt").string(), model.config(), ps,
                        &opt.state(),
                        {{"epoch", epoch}, {"batch_start", start}, {"loss", "non-finite"}});
        throw std::runtime_error("fit: loss diverged at epoch " + std::to_string(epoch) +
                                 ", diagnostic checkpoint written");
      }
      float inv = static_cast<float>(1.0 / n);
      for (int i = 0; i < ps.size(); ++i) {
        auto& gr = ps.at(i).grad;
        for (int64_t k = 0; k < gr.size(); ++k) gr[k] *= inv;
      }
      auto [norm, clipped] = clip_grad_norm(ps, cfg.clip_norm);
      (void)norm;
      if (clipped) ++clip_events;
      opt.step(lr);
      loss_acc += batch_loss * n;
      seen += static_cast<int64_t>(stop - start);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_acc / static_cast<double>(seen);
    rec.dev_sisdr = mean_dev_sisdr(model, dev, scfg);
    rec.lr = lr;
    rec.clip_events = clip_events;
    res.history.push_back(rec);
    hist << epoch_record_json(rec).dump() << "\n";
    hist.flush();
    if (on_epoch) on_epoch(rec);
    res.epochs_run = epoch + 1;

    bool improved = rec.dev_sisdr > res.best_dev_sisdr;
    if (improved) {
      res.best_dev_sisdr = rec.dev_sisdr;
      res.best_epoch = epoch;
      save_checkpoint(res.best_path, model.config(), ps, &opt.state(),
                      {{"epoch", epoch}, {"dev_sisdr", rec.dev_sisdr}});
    }
    if (stopper.update(epoch, rec.dev_sisdr)) {
      res.early_stopped = true;
      break;
    }
  }

  save_checkpoint(res.last_path, model.config(), ps, &opt.state(),
                  {{"epoch", res.epochs_run - 1},
                   {"dev_sisdr", res.history.empty() ? 0.0 : res.history.back().dev_sisdr}});
  return res;
}

}  // namespace nsx

#endif  // NSX_TRAINER_TRAINER_HPP_
