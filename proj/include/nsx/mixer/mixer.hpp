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

#ifndef NSX_MIXER_MIXER_HPP_
#define NSX_MIXER_MIXER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsx/acoustics/bank.hpp"
#include "nsx/acoustics/rir.hpp"
#include "nsx/acoustics/scene.hpp"
#include "nsx/core/fft.hpp"
#include "nsx/core/rng.hpp"
#include "nsx/core/wav.hpp"
#include "nsx/corpus/corpus.hpp"
#include "nsx/signal/metrics.hpp"

namespace nsx {

struct DbInterval {
  double lo = 0.0, hi = 0.0;
};

struct ScenarioConfig {
  int n_speakers = 2;
  ReverbRegime regime = ReverbRegime::kNormal;
  bool intruded = false;
  double mixture_length = 5.0;
  DbInterval rms_near_db{-30.0, -20.0};
  DbInterval rms_far_db{-30.0, -20.0};
  DbInterval intruder_length{1.0, 3.0};

  void validate() const {
    if (n_speakers < 2) throw std::invalid_argument("scenario: n_speakers must be >= 2");
    if (mixture_length <= 0.0) throw std::invalid_argument("scenario: mixture_length must be positive");
    if (rms_near_db.hi < rms_near_db.lo || rms_far_db.hi < rms_far_db.lo ||
        intruder_length.hi < intruder_length.lo)
      throw std::invalid_argument("scenario: empty interval");
  }
};

struct MixtureSample {
  std::vector<float> mixture;
  std::vector<float> target;
  std::vector<std::vector<float>> stems;
  int target_speaker_label = -1;
  std::string scene_id;
  ScenarioConfig scenario;
  uint64_t seed = 0;

  // construction details, useful for analysis and tests
  std::vector<std::string> stem_speakers;
  std::vector<int> stem_positions;
  double intruder_onset_s = -1.0;
  double peak_scale = 1.0;
};

inline std::vector<float> set_rms(const std::vector<float>& wave, double target_db) {
  double cur = rms_db(wave);  // throws on zero energy
  double scale = std::pow(10.0, (target_db - cur) / 20.0);
  std::vector<float> out(wave.size());
  for (size_t i = 0; i < wave.size(); ++i) out[i] = static_cast<float>(wave[i] * scale);
  return out;
}

inline std::vector<float> render_source(const std::vector<float>& dry, const std::vector<float>& rir) {
  if (rir.empty()) throw std::invalid_argument("render_source: empty impulse response");
  if (dry.empty()) throw std::invalid_argument("render_source: empty input");
  std::vector<float> full = fft_convolve(dry, rir);
  full.resize(dry.size());
  return full;
}

inline std::vector<float> render_source(const std::vector<float>& dry, const ImpulseResponse& rir) {
  return render_source(dry, rir.samples);
}

// Maps a scene source index to its impulse response samples.
using RirLookup = std::function<const std::vector<float>&(int)>;

inline MixtureSample make_mixture(const RoomScene& scene, const CorpusManifest& manifest,
                                  const ScenarioConfig& cfg, uint64_t rng_seed,
                                  const RirLookup& rir_of, const std::string& scene_id = "",
                                  UtteranceCache* cache = nullptr) {
  cfg.validate();
  int n = cfg.n_speakers;
  std::vector<int> near_idx, far_idx;
  for (size_t k = 0; k < scene.source_positions.size(); ++k)
    (scene.near_mask[k] ? near_idx : far_idx).push_back(static_cast<int>(k));
  int needed_near = cfg.intruded ? 2 : 1;
  if (static_cast<int>(near_idx.size()) < needed_near || static_cast<int>(far_idx.size()) < n - 1)
    throw std::invalid_argument("make_mixture: scene lacks required positions");

  std::vector<std::string> speakers;
  speakers.reserve(manifest.speaker_index.size());
  for (const auto& kv : manifest.speaker_index) speakers.push_back(kv.first);
  int n_draw = n + (cfg.intruded ? 1 : 0);
  if (static_cast<int>(speakers.size()) < n_draw)
    throw std::invalid_argument("make_mixture: not enough speakers in manifest");

  Rng rng(splitmix64(rng_seed ^ 0x313A7ULL));

  // distinct speakers via partial shuffle
  for (int i = 0; i < n_draw; ++i) {
    int64_t j = i + rng.uniform_int(static_cast<int64_t>(speakers.size()) - i);
    std::swap(speakers[static_cast<size_t>(i)], speakers[static_cast<size_t>(j)]);
  }

  int target_pos = near_idx[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(near_idx.size())))];
  for (int i = 0; i < n - 1; ++i) {
    int64_t j = i + rng.uniform_int(static_cast<int64_t>(far_idx.size()) - i);
    std::swap(far_idx[static_cast<size_t>(i)], far_idx[static_cast<size_t>(j)]);
  }

  size_t len = static_cast<size_t>(std::llround(cfg.mixture_length * kCorpusSampleRate));
  MixtureSample out;
  out.scenario = cfg;
  out.seed = rng_seed;
  out.scene_id = scene_id;
  out.target_speaker_label = manifest.label_of(speakers[0]);

  auto add_stem = [&](const std::string& speaker, int pos, const DbInterval& band, double active_tail_s) {
    uint64_t seg_seed = rng.next_u64();
    double rms = rng.uniform(band.lo, band.hi);
    std::vector<float> dry = draw_segment(manifest, speaker, cfg.mixture_length, seg_seed, cache);
    dry = set_rms(dry, rms);
    size_t onset = 0;
    if (active_tail_s >= 0.0) {
      onset = len - std::min(len, static_cast<size_t>(std::llround(active_tail_s * kCorpusSampleRate)));
      std::fill(dry.begin(), dry.begin() + static_cast<long>(onset), 0.0f);
      out.intruder_onset_s = static_cast<double>(onset) / kCorpusSampleRate;
    }
    std::vector<float> wet = render_source(dry, rir_of(pos));
    // fft convolution leaves ~1e-12 residue where the dry signal was muted
    std::fill(wet.begin(), wet.begin() + static_cast<long>(std::min(onset, wet.size())), 0.0f);
    out.stems.push_back(std::move(wet));
    out.stem_speakers.push_back(speaker);
    out.stem_positions.push_back(pos);
  };

  add_stem(speakers[0], target_pos, cfg.rms_near_db, -1.0);
  for (int i = 1; i < n; ++i)
    add_stem(speakers[static_cast<size_t>(i)], far_idx[static_cast<size_t>(i - 1)], cfg.rms_far_db, -1.0);
  if (cfg.intruded) {
    int intruder_pos = -1;
    for (int p : near_idx)
      if (p != target_pos) intruder_pos = p;
    double active = rng.uniform(cfg.intruder_length.lo, cfg.intruder_length.hi);
    add_stem(speakers[static_cast<size_t>(n)], intruder_pos, cfg.rms_near_db, active);
  }

  out.mixture.assign(len, 0.0f);
  for (const auto& s : out.stems)
    for (size_t i = 0; i < len; ++i) out.mixture[i] += s[i];

  float peak = 0.0f;
  for (float v : out.mixture) peak = std::max(peak, std::abs(v));
  if (peak > 1.0f) {
    float scale = 1.0f / peak;
    out.peak_scale = static_cast<double>(scale);
    for (auto& s : out.stems)
      for (float& v : s) v *= scale;
    std::fill(out.mixture.begin(), out.mixture.end(), 0.0f);
    for (const auto& s : out.stems)
      for (size_t i = 0; i < len; ++i) out.mixture[i] += s[i];
  }
  out.target = out.stems[0];
  return out;
}

// Convenience overload rendering the impulse responses in place.
inline MixtureSample make_mixture(const RoomScene& scene, const CorpusManifest& manifest,
                                  const ScenarioConfig& cfg, uint64_t rng_seed) {
  std::unordered_map<int, std::vector<float>> memo;
  RirLookup lookup = [&](int pos) -> const std::vector<float>& {
    auto it = memo.find(pos);
    if (it == memo.end()) it = memo.emplace(pos, generate_rir(scene, pos).samples).first;
    return it->second;
  };
  return make_mixture(scene, manifest, cfg, rng_seed, lookup);
}

struct DatasetEntry {
  std::string sample_id;
  std::string mixture_path;
  std::string target_path;
  std::vector<std::string> stem_paths;
  int target_speaker_label = -1;
  std::string scene_id;
  int n_speakers = 0;
  bool intruded = false;
  std::string regime;
  uint64_t seed = 0;
};

inline nlohmann::json dataset_entry_json(const DatasetEntry& e) {
  return {{"sample_id", e.sample_id},
          {"mixture_path", e.mixture_path},
          {"target_path", e.target_path},
          {"stem_paths", e.stem_paths},
          {"target_speaker_label", e.target_speaker_label},
          {"scene_id", e.scene_id},
          {"n_speakers", e.n_speakers},
          {"intruded", e.intruded},
          {"regime", e.regime},
          {"seed", e.seed}};
}

inline DatasetEntry dataset_entry_from_json(const nlohmann::json& j) {
  DatasetEntry e;
  e.sample_id = j.at("sample_id").get<std::string>();
  e.mixture_path = j.at("mixture_path").get<std::string>();
  e.target_path = j.at("target_path").get<std::string>();
  e.stem_paths = j.at("stem_paths").get<std::vector<std::string>>();
  e.target_speaker_label = j.at("target_speaker_label").get<int>();
  e.scene_id = j.at("scene_id").get<std::string>();
  e.n_speakers = j.at("n_speakers").get<int>();
  e.intruded = j.at("intruded").get<bool>();
  e.regime = j.at("regime").get<std::string>();
  e.seed = j.at("seed").get<uint64_t>();
  return e;
}

// Writes count mixtures under out_dir (one directory per sample) plus a
// samples.jsonl manifest. Scenes are cycled; each sample is pure in
// (rng_seed, index).
inline std::vector<DatasetEntry> build_dataset(const std::vector<SceneRecord>& scenes,
                                               const std::string& bank_dir,
                                               const CorpusManifest& manifest, const ScenarioConfig& cfg,
                                               int count, uint64_t rng_seed, const std::string& out_dir,
                                               const std::function<void(int, int)>& progress = nullptr) {
  namespace fs = std::filesystem;
  if (scenes.empty()) throw std::invalid_argument("build_dataset: no scenes");
  cfg.validate();
  fs::create_directories(out_dir);
  std::ofstream mf(fs::path(out_dir) / "samples.jsonl", std::ios::trunc);
  if (!mf) throw std::runtime_error("build_dataset: cannot write manifest in " + out_dir);

  UtteranceCache cache;
  std::unordered_map<std::string, std::vector<std::vector<float>>> rir_cache;
  std::vector<DatasetEntry> entries;
  entries.reserve(static_cast<size_t>(count));

  for (int i = 0; i < count; ++i) {
    const SceneRecord& rec = scenes[static_cast<size_t>(i) % scenes.size()];
    auto& rirs = rir_cache[rec.scene_id];
    if (rirs.empty()) {
      rirs.resize(rec.rir_paths.size());
      for (size_t k = 0; k < rec.rir_paths.size(); ++k)
        rirs[k] = load_rir_wave(bank_dir, rec, static_cast<int>(k));
    }
    RirLookup lookup = [&](int pos) -> const std::vector<float>& { return rirs.at(static_cast<size_t>(pos)); };

    uint64_t sample_seed = splitmix64(rng_seed ^ (0xD5A7A5E7ULL + static_cast<uint64_t>(i)));
    MixtureSample s = make_mixture(rec.scene, manifest, cfg, sample_seed, lookup, rec.scene_id, &cache);

    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%06d", i);
    DatasetEntry e;
    e.sample_id = buf;
    fs::path dir = fs::path(out_dir) / e.sample_id;
    fs::create_directories(dir);
    e.mixture_path = (dir / "mixture.wav").string();
    e.target_path = (dir / "target.wav").string();
    write_wav_f32(e.mixture_path, s.mixture, kCorpusSampleRate);
    write_wav_f32(e.target_path, s.target, kCorpusSampleRate);
    for (size_t k = 0; k < s.stems.size(); ++k) {
      std::string p = (dir / ("stem_" + std::to_string(k) + ".wav")).string();
      write_wav_f32(p, s.stems[k], kCorpusSampleRate);
      e.stem_paths.push_back(p);
    }
    e.target_speaker_label = s.target_speaker_label;
    e.scene_id = s.scene_id;
    e.n_speakers = cfg.n_speakers;
    e.intruded = cfg.intruded;
    e.regime = regime_name(cfg.regime);
    e.seed = sample_seed;
    mf << dataset_entry_json(e).dump() << "\n";
    entries.push_back(std::move(e));
    if (progress) progress(i + 1, count);
  }
  return entries;
}

inline std::vector<DatasetEntry> load_dataset(const std::string& dir) {
  std::ifstream f(std::filesystem::path(dir) / "samples.jsonl");
  if (!f) throw std::runtime_error("load_dataset: no samples.jsonl in " + dir);
  std::vector<DatasetEntry> entries;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    entries.push_back(dataset_entry_from_json(nlohmann::json::parse(line)));
  }
  return entries;
}

}  // namespace nsx

#endif  // NSX_MIXER_MIXER_HPP_
