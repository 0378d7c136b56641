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

#ifndef NSX_MODEL_CONFIG_HPP_
#define NSX_MODEL_CONFIG_HPP_

#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace nsx {

enum class ModelKind { kNearSpeakerExtractor, kBlstmBaseline, kUnetBaseline };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kNearSpeakerExtractor: return "near_speaker_extractor";
    case ModelKind::kBlstmBaseline: return "blstm";
    case ModelKind::kUnetBaseline: return "unet";
  }
  return "?";
}

inline ModelKind model_kind_from_name(const std::string& s) {
  if (s == "near_speaker_extractor") return ModelKind::kNearSpeakerExtractor;
  if (s == "blstm") return ModelKind::kBlstmBaseline;
  if (s == "unet") return ModelKind::kUnetBaseline;
  throw std::invalid_argument("unknown model kind: " + s);
}

struct ModelConfig {
  ModelKind kind = ModelKind::kNearSpeakerExtractor;
  int C = 6;    // extractor blocks
  int D = 24;   // embedding channels per T-F unit
  int E = 4;    // attention embedding dim
  int L = 4;    // attention heads
  int I = 4;    // unfold kernel over frequency
  int J = 1;    // unfold stride
  int H = 96;   // BLSTM hidden units per direction (4*D at default D)
  int N = 0;    // speaker classes, 0 means no classification head
  int F = 129;  // frequency bins, fixed by the analysis front end
  // baseline knobs
  int lstm_layers = 2;
  int lstm_width = 512;
  bool ablate_se = false;
  bool ablate_t_att = false;
  bool ablate_f_att = false;
  uint64_t init_seed = 1;

  void validate() const {
    if (C < 1 || D < 1 || E < 1 || L < 1 || I < 1 || J < 1 || H < 1 || F < 1 || N < 0 ||
        lstm_layers < 1 || lstm_width < 1)
      throw std::invalid_argument("model config: all sizes must be positive");
    if (D % L != 0) throw std::invalid_argument("model config: D must be divisible by L");
    if (I < J) throw std::invalid_argument("model config: unfold kernel smaller than stride");
  }

  // frequency padding so the unfold tiles the axis: ceil(F/J) positions
  int unfold_positions() const { return (F + J - 1) / J; }
  int padded_bins() const { return (unfold_positions() - 1) * J + I; }
};

inline nlohmann::json model_config_json(const ModelConfig& c) {
  return nlohmann::json{{"kind", model_kind_name(c.kind)},
                        {"blocks", c.C},
                        {"embed_dim", c.D},
                        {"attention_dim", c.E},
                        {"attention_heads", c.L},
                        {"unfold_kernel", c.I},
                        {"unfold_stride", c.J},
                        {"lstm_hidden", c.H},
                        {"speaker_classes", c.N},
                        {"bins", c.F},
                        {"lstm_layers", c.lstm_layers},
                        {"lstm_width", c.lstm_width},
                        {"ablate_se", c.ablate_se},
                        {"ablate_t_att", c.ablate_t_att},
                        {"ablate_f_att", c.ablate_f_att},
                        {"init_seed", c.init_seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.kind = model_kind_from_name(j.value("kind", std::string("near_speaker_extractor")));
  c.C = j.value("blocks", c.C);
  c.D = j.value("embed_dim", c.D);
  c.E = j.value("attention_dim", c.E);
  c.L = j.value("attention_heads", c.L);
  c.I = j.value("unfold_kernel", c.I);
  c.J = j.value("unfold_stride", c.J);
  c.H = j.value("lstm_hidden", c.H);
  c.N = j.value("speaker_classes", c.N);
  c.F = j.value("bins", c.F);
  c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
  c.lstm_width = j.value("lstm_width", c.lstm_width);
  c.ablate_se = j.value("ablate_se", c.ablate_se);
  c.ablate_t_att = j.value("ablate_t_att", c.ablate_t_att);
  c.ablate_f_att = j.value("ablate_f_att", c.ablate_f_att);
  c.init_seed = j.value("init_seed", c.init_seed);
  c.validate();
  return c;
}

}  // namespace nsx

#endif  // NSX_MODEL_CONFIG_HPP_
