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

#ifndef NSX_PIPELINE_EXPERIMENT_HPP_
#define NSX_PIPELINE_EXPERIMENT_HPP_

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsx/mixer/mixer.hpp"
#include "nsx/model/config.hpp"
#include "nsx/trainer/trainer.hpp"

namespace nsx {

// One mixture split to synthesize: name decides the output directory.
struct MixSpec {
  std::string name = "train";
  int count = 100;
  int n_speakers = 2;
  bool intruded = false;
  std::string regime = "normal";
};

inline nlohmann::json mix_spec_json(const MixSpec& m) {
  return {{"name", m.name},
          {"count", m.count},
          {"n_speakers", m.n_speakers},
          {"intruded", m.intruded},
          {"regime", m.regime}};
}

inline MixSpec mix_spec_from_json(const nlohmann::json& j, const MixSpec& base = {}) {
  MixSpec m = base;
  m.name = j.value("name", m.name);
  m.count = j.value("count", m.count);
  m.n_speakers = j.value("n_speakers", m.n_speakers);
  m.intruded = j.value("intruded", m.intruded);
  m.regime = j.value("regime", m.regime);
  return m;
}

struct AcousticsSection {
  int scene_count = 12;
  uint64_t seed = 11;
};

struct CorpusSection {
  std::string root;  // empty: synthesize a surrogate corpus
  int speakers = 24;
  int utterances = 8;
  double min_seconds = 2.0;
  double max_seconds = 4.0;
  int speaker_depth = 0;  // used when scanning an existing tree
  uint64_t seed = 12;
};

struct ScenarioSection {
  double mixture_length = 2.0;
  double far_db_lo = -30.0;
  double far_db_hi = -20.0;
  uint64_t seed = 13;
  MixSpec train{"train", 160, 2, false, "normal"};
  MixSpec dev{"dev", 32, 2, false, "normal"};
  std::vector<MixSpec> test{{"test_2spkr", 48, 2, false, "normal"},
                            {"test_3spkr", 48, 3, false, "normal"}};
};

struct ExperimentConfig {
  std::string experiment_id = "exp";
  std::string output_root = "runs";
  AcousticsSection acoustics;
  CorpusSection corpus;
  ScenarioSection scenario;
  ModelConfig model;
  StftConfig stft;
  TrainConfig trainer;

  ExperimentConfig() {
    // desk-scale defaults: small enough for a single core, same shape as
    // the full recipe
    model.C = 2;
    model.D = 8;
    model.E = 2;
    model.L = 2;
    model.H = 16;
    model.lstm_layers = 2;
    model.lstm_width = 64;
    trainer.batch_size = 8;
    trainer.max_epochs = 10;
  }

  std::string out_dir() const { return output_root + "/" + experiment_id; }

  void validate() const {
    if (experiment_id.empty()) throw std::invalid_argument("experiment: empty experiment_id");
    if (output_root.empty()) throw std::invalid_argument("experiment: empty output_root");
    if (acoustics.scene_count < 1) throw std::invalid_argument("experiment: scene_count < 1");
    if (corpus.root.empty() && corpus.speakers < 4)
      throw std::invalid_argument("experiment: synthetic corpus needs >= 4 speakers");
    if (scenario.mixture_length <= 0.0)
      throw std::invalid_argument("experiment: mixture_length must be positive");
    if (scenario.train.count < 1 || scenario.dev.count < 1)
      throw std::invalid_argument("experiment: train/dev counts must be positive");
    if (scenario.test.empty()) throw std::invalid_argument("experiment: no test splits");
    if (model.F != stft.bins())
      throw std::invalid_argument("experiment: model bins must match the stft front end");
    model.validate();
    trainer.validate();
  }
};

inline nlohmann::json experiment_config_json(const ExperimentConfig& c) {
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : c.scenario.test) tests.push_back(mix_spec_json(t));
  nlohmann::json model = model_config_json(c.model);
  model["stft_win"] = c.stft.win;
  model["stft_hop"] = c.stft.hop;
  return {{"experiment_id", c.experiment_id},
          {"output_root", c.output_root},
          {"acoustics", {{"scene_count", c.acoustics.scene_count}, {"seed", c.acoustics.seed}}},
          {"corpus",
           {{"root", c.corpus.root},
            {"speakers", c.corpus.speakers},
            {"utterances", c.corpus.utterances},
            {"min_seconds", c.corpus.min_seconds},
            {"max_seconds", c.corpus.max_seconds},
            {"speaker_depth", c.corpus.speaker_depth},
            {"seed", c.corpus.seed}}},
          {"scenario",
           {{"mixture_length", c.scenario.mixture_length},
            {"far_db_lo", c.scenario.far_db_lo},
            {"far_db_hi", c.scenario.far_db_hi},
            {"seed", c.scenario.seed},
            {"train", mix_spec_json(c.scenario.train)},
            {"dev", mix_spec_json(c.scenario.dev)},
            {"test", tests}}},
          {"model", model},
          {"trainer", train_config_json(c.trainer)}};
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.experiment_id = j.value("experiment_id", c.experiment_id);
  c.output_root = j.value("output_root", c.output_root);
  if (j.contains("acoustics")) {
    const auto& a = j.at("acoustics");
    c.acoustics.scene_count = a.value("scene_count", c.acoustics.scene_count);
    c.acoustics.seed = a.value("seed", c.acoustics.seed);
  }
  if (j.contains("corpus")) {
    const auto& p = j.at("corpus");
    c.corpus.root = p.value("root", c.corpus.root);
    c.corpus.speakers = p.value("speakers", c.corpus.speakers);
    c.corpus.utterances = p.value("utterances", c.corpus.utterances);
    c.corpus.min_seconds = p.value("min_seconds", c.corpus.min_seconds);
    c.corpus.max_seconds = p.value("max_seconds", c.corpus.max_seconds);
    c.corpus.speaker_depth = p.value("speaker_depth", c.corpus.speaker_depth);
    c.corpus.seed = p.value("seed", c.corpus.seed);
  }
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    c.scenario.mixture_length = s.value("mixture_length", c.scenario.mixture_length);
    c.scenario.far_db_lo = s.value("far_db_lo", c.scenario.far_db_lo);
    c.scenario.far_db_hi = s.value("far_db_hi", c.scenario.far_db_hi);
    c.scenario.seed = s.value("seed", c.scenario.seed);
    if (s.contains("train")) c.scenario.train = mix_spec_from_json(s.at("train"), c.scenario.train);
    if (s.contains("dev")) c.scenario.dev = mix_spec_from_json(s.at("dev"), c.scenario.dev);
    if (s.contains("test")) {
      c.scenario.test.clear();
      MixSpec base{"test", 48, 2, false, "normal"};
      for (const auto& t : s.at("test")) c.scenario.test.push_back(mix_spec_from_json(t, base));
    }
  }
  if (j.contains("model")) {
    c.model = model_config_from_json(j.at("model"));
    c.stft.win = j.at("model").value("stft_win", c.stft.win);
    c.stft.hop = j.at("model").value("stft_hop", c.stft.hop);
  }
  if (j.contains("trainer")) c.trainer = train_config_from_json(j.at("trainer"));
  return c;
}

// Environment variables override paths only; everything else stays in the
// config file.
inline void apply_env_overrides(ExperimentConfig& c) {
  if (const char* v = std::getenv("NSX_OUTPUT_ROOT")) c.output_root = v;
  if (const char* v = std::getenv("NSX_CORPUS_ROOT")) c.corpus.root = v;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("experiment: cannot read config " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  ExperimentConfig c = experiment_config_from_json(j);
  apply_env_overrides(c);
  return c;
}

inline void save_experiment_config(const ExperimentConfig& c, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("experiment: cannot write config " + path);
  f << experiment_config_json(c).dump(2) << "\n";
}

}  // namespace nsx

#endif  // NSX_PIPELINE_EXPERIMENT_HPP_
