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

#ifndef NSX_MODEL_MODEL_HPP_
#define NSX_MODEL_MODEL_HPP_

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsx/model/baselines.hpp"
#include "nsx/model/extractor.hpp"

namespace nsx {

template <typename S>
struct ModelOutput {
  int spec = -1;               // node for predicted RI planes [2, F, T]
  std::vector<int> logits;     // per-block speaker logits, possibly empty
};

// Uniform front for the three architectures so the trainer and CLI can stay
// agnostic of which one is under the hood.
template <typename S>
class Model {
 public:
  explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
    switch (cfg_.kind) {
      case ModelKind::kNearSpeakerExtractor:
        ns_ = std::make_unique<NearSpeakerExtractor<S>>(cfg_);
        break;
      case ModelKind::kBlstmBaseline:
        lstm_ = std::make_unique<BlstmModel<S>>(cfg_);
        break;
      case ModelKind::kUnetBaseline:
        unet_ = std::make_unique<UnetModel<S>>(cfg_);
        break;
    }
  }

  const ModelConfig& config() const { return cfg_; }

  ad::ParamStore<S>& params() {
    if (ns_) return ns_->params();
    if (lstm_) return lstm_->params();
    return unet_->params();
  }
  const ad::ParamStore<S>& params() const {
    return const_cast<Model*>(this)->params();
  }

  ModelOutput<S> forward(ad::Graph<S>& g, int x) {
    ModelOutput<S> out;
    if (ns_) {
      auto f = ns_->forward(g, x);
      out.spec = f.spec;
      out.logits = std::move(f.logits);
    } else if (lstm_) {
      out.spec = lstm_->forward(g, x);
    } else {
      out.spec = unet_->forward(g, x);
    }
    return out;
  }

 private:
  ModelConfig cfg_;
  std::unique_ptr<NearSpeakerExtractor<S>> ns_;
  std::unique_ptr<BlstmModel<S>> lstm_;
  std::unique_ptr<UnetModel<S>> unet_;
};

// Adam first/second moments plus step count, in parameter-store order.
struct AdamState {
  uint64_t step = 0;
  std::vector<std::vector<float>> m, v;
};

// Checkpoint container: magic, config JSON, free-form metadata JSON, named
// float32 parameter arrays, then optional optimizer moments in the same
// order. Little-endian, not meant to travel across byte orders.
inline constexpr char kCheckpointMagic[8] = {'N', 'S', 'X', 'C', 'P', '0', '0', '1'};

namespace ckpt_detail {

inline void put_u64(std::ofstream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline uint64_t get_u64(std::ifstream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
inline void put_str(std::ofstream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string get_str(std::ifstream& is) {
  uint64_t n = get_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}
inline void put_floats(std::ofstream& os, const float* p, uint64_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(float)));
}
inline void get_floats(std::ifstream& is, float* p, uint64_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(float)));
}

}  // namespace ckpt_detail

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            const ad::ParamStore<float>& ps, const AdamState* opt = nullptr,
                            const nlohmann::json& extra = nlohmann::json::object()) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
  os.write(kCheckpointMagic, 8);
  ckpt_detail::put_str(os, model_config_json(cfg).dump());
  ckpt_detail::put_str(os, extra.dump());
  ckpt_detail::put_u64(os, static_cast<uint64_t>(ps.size()));
  for (int i = 0; i < ps.size(); ++i) {
    const auto& p = ps.at(i);
    ckpt_detail::put_str(os, p.name);
    ckpt_detail::put_u64(os, static_cast<uint64_t>(p.value.rank()));
    for (int a = 0; a < p.value.rank(); ++a)
      ckpt_detail::put_u64(os, static_cast<uint64_t>(p.value.dim(a)));
    ckpt_detail::put_floats(os, p.value.data(), static_cast<uint64_t>(p.value.size()));
  }
  uint8_t has_opt = opt != nullptr ? 1 : 0;
  os.write(reinterpret_cast<const char*>(&has_opt), 1);
  if (opt) {
    ckpt_detail::put_u64(os, opt->step);
    for (int i = 0; i < ps.size(); ++i) {
      const auto& mi = opt->m.at(static_cast<size_t>(i));
      const auto& vi = opt->v.at(static_cast<size_t>(i));
      ckpt_detail::put_floats(os, mi.data(), mi.size());
      ckpt_detail::put_floats(os, vi.data(), vi.size());
    }
  }
  if (!os) throw std::runtime_error("checkpoint: short write to " + path);
}

struct LoadedCheckpoint {
  ModelConfig config;
  nlohmann::json extra;
  std::vector<std::pair<std::string, Tensor<float>>> params;
  bool has_opt = false;
  AdamState opt;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  LoadedCheckpoint out;
  out.config = model_config_from_json(nlohmann::json::parse(ckpt_detail::get_str(is)));
  out.extra = nlohmann::json::parse(ckpt_detail::get_str(is));
  uint64_t n = ckpt_detail::get_u64(is);
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = ckpt_detail::get_str(is);
    uint64_t rank = ckpt_detail::get_u64(is);
    std::vector<int64_t> shape(rank);
    for (auto& d : shape) d = static_cast<int64_t>(ckpt_detail::get_u64(is));
    Tensor<float> t(shape);
    ckpt_detail::get_floats(is, t.data(), static_cast<uint64_t>(t.size()));
    out.params.emplace_back(std::move(name), std::move(t));
  }
  uint8_t has_opt = 0;
  is.read(reinterpret_cast<char*>(&has_opt), 1);
  if (is && has_opt) {
    out.has_opt = true;
    out.opt.step = ckpt_detail::get_u64(is);
    for (auto& [name, t] : out.params) {
      (void)name;
      std::vector<float> m(static_cast<size_t>(t.size())), v(static_cast<size_t>(t.size()));
      ckpt_detail::get_floats(is, m.data(), static_cast<uint64_t>(t.size()));
      ckpt_detail::get_floats(is, v.data(), static_cast<uint64_t>(t.size()));
      out.opt.m.push_back(std::move(m));
      out.opt.v.push_back(std::move(v));
    }
  }
  if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
  return out;
}

// Copies loaded arrays into a freshly built store. Name set and shapes must
// match exactly; anything else means the config and weights disagree.
inline void restore_params(ad::ParamStore<float>& ps,
                           const std::vector<std::pair<std::string, Tensor<float>>>& loaded) {
  if (static_cast<size_t>(ps.size()) != loaded.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (const auto& [name, t] : loaded) {
    int id = ps.find(name);
    if (id < 0) throw std::runtime_error("checkpoint: unknown parameter " + name);
    auto& p = ps.at(id);
    if (!p.value.same_shape(t))
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    std::memcpy(p.value.data(), t.data(), static_cast<size_t>(t.size()) * sizeof(float));
  }
}

inline Model<float> load_model(const std::string& path) {
  LoadedCheckpoint ck = load_checkpoint(path);
  Model<float> model(ck.config);
  restore_params(model.params(), ck.params);
  return model;
}

}  // namespace nsx

#endif  // NSX_MODEL_MODEL_HPP_
