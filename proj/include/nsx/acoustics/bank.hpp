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

#ifndef NSX_ACOUSTICS_BANK_HPP_
#define NSX_ACOUSTICS_BANK_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsx/acoustics/rir.hpp"
#include "nsx/acoustics/scene.hpp"
#include "nsx/core/wav.hpp"

namespace nsx {

struct SceneRecord {
  std::string scene_id;
  RoomScene scene;
  std::vector<std::string> rir_paths;  // relative to the bank directory
};

namespace bank_detail {

inline nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v[0], v[1], v[2]}); }

inline Vec3 vec3_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("rir bank: bad vector field");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace bank_detail

inline nlohmann::json scene_record_json(const SceneRecord& rec) {
  using bank_detail::vec3_json;
  nlohmann::json sources = nlohmann::json::array();
  for (size_t k = 0; k < rec.scene.source_positions.size(); ++k) {
    sources.push_back({{"pos", vec3_json(rec.scene.source_positions[k])},
                       {"distance", rec.scene.source_distance(static_cast<int>(k))},
                       {"near", static_cast<bool>(rec.scene.near_mask[k])},
                       {"rir", rec.rir_paths.at(k)}});
  }
  return {{"scene_id", rec.scene_id},
          {"dims", vec3_json(rec.scene.dims)},
          {"rt60", rec.scene.rt60},
          {"mic_pos", vec3_json(rec.scene.mic_pos)},
          {"seed", rec.scene.seed},
          {"sources", sources}};
}

inline SceneRecord scene_record_from_json(const nlohmann::json& j) {
  using bank_detail::vec3_from;
  SceneRecord rec;
  rec.scene_id = j.at("scene_id").get<std::string>();
  rec.scene.dims = vec3_from(j.at("dims"));
  rec.scene.rt60 = j.at("rt60").get<double>();
  rec.scene.mic_pos = vec3_from(j.at("mic_pos"));
  rec.scene.seed = j.at("seed").get<uint64_t>();
  for (const auto& s : j.at("sources")) {
    rec.scene.source_positions.push_back(vec3_from(s.at("pos")));
    rec.scene.near_mask.push_back(s.at("near").get<bool>());
    rec.rir_paths.push_back(s.at("rir").get<std::string>());
  }
  return rec;
}

// Generates n_scenes rooms, renders one impulse response per source, and
// writes WAVs plus a scenes.jsonl manifest under dir.
inline std::vector<SceneRecord> build_rir_bank(
    const std::string& dir, int n_scenes, uint64_t base_seed, ReverbRegime regime,
    const std::function<void(int, int)>& progress = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "scenes.jsonl", std::ios::trunc);
  if (!manifest) throw std::runtime_error("build_rir_bank: cannot write manifest in " + dir);

  std::vector<SceneRecord> records;
  records.reserve(static_cast<size_t>(n_scenes));
  for (int i = 0; i < n_scenes; ++i) {
    SceneRecord rec;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%05d", i);
    rec.scene_id = buf;
    rec.scene = sample_room_scene(base_seed + static_cast<uint64_t>(i), regime);
    fs::create_directories(fs::path(dir) / rec.scene_id);
    for (int k = 0; k < kSourcesPerScene; ++k) {
      ImpulseResponse rir = generate_rir(rec.scene, k);
      std::string rel = rec.scene_id + "/src_" + std::to_string(k) + ".wav";
      write_wav_f32((fs::path(dir) / rel).string(), rir.samples, kRirSampleRate);
      rec.rir_paths.push_back(rel);
    }
    manifest << scene_record_json(rec).dump() << "\n";
    records.push_back(std::move(rec));
    if (progress) progress(i + 1, n_scenes);
  }
  return records;
}

inline std::vector<SceneRecord> load_rir_bank(const std::string& dir) {
  std::ifstream manifest(std::filesystem::path(dir) / "scenes.jsonl");
  if (!manifest) throw std::runtime_error("load_rir_bank: no scenes.jsonl in " + dir);
  std::vector<SceneRecord> records;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    records.push_back(scene_record_from_json(nlohmann::json::parse(line)));
  }
  return records;
}

inline std::vector<float> load_rir_wave(const std::string& bank_dir, const SceneRecord& rec, int source_index) {
  auto path = std::filesystem::path(bank_dir) / rec.rir_paths.at(static_cast<size_t>(source_index));
  WavData w = read_wav(path.string());
  if (w.sample_rate != kRirSampleRate) throw std::runtime_error("load_rir_wave: unexpected sample rate");
  return std::move(w.samples);
}

}  // namespace nsx

#endif  // NSX_ACOUSTICS_BANK_HPP_
