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

#ifndef NSX_CORPUS_CORPUS_HPP_
#define NSX_CORPUS_CORPUS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsx/core/rng.hpp"
#include "nsx/core/wav.hpp"

namespace nsx {

constexpr int kCorpusSampleRate = 16000;

enum class Partition { kTrain, kDev, kTest };

inline const char* partition_name(Partition p) {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kDev: return "dev";
    default: return "test";
  }
}
inline Partition partition_from_name(const std::string& s) {
  if (s == "train") return Partition::kTrain;
  if (s == "dev") return Partition::kDev;
  if (s == "test") return Partition::kTest;
  throw std::invalid_argument("unknown partition: " + s);
}

struct UtteranceRecord {
  std::string path;
  std::string speaker_id;
  double duration = 0.0;  // seconds at 16 kHz
  int sample_rate = kCorpusSampleRate;
};

struct CorpusManifest {
  std::vector<UtteranceRecord> records;
  Partition partition = Partition::kTrain;
  std::map<std::string, int> speaker_index;                    // speaker -> dense label
  std::unordered_map<std::string, std::vector<size_t>> by_speaker;  // speaker -> record rows

  int num_speakers() const { return static_cast<int>(speaker_index.size()); }

  void rebuild_indices() {
    by_speaker.clear();
    for (size_t i = 0; i < records.size(); ++i) by_speaker[records[i].speaker_id].push_back(i);
    if (speaker_index.empty()) {
      for (const auto& r : records) speaker_index.emplace(r.speaker_id, 0);
      int next = 0;
      for (auto& kv : speaker_index) kv.second = next++;  // std::map keeps keys sorted
    }
  }

  int label_of(const std::string& speaker) const {
    auto it = speaker_index.find(speaker);
    if (it == speaker_index.end()) throw std::out_of_range("unknown speaker: " + speaker);
    return it->second;
  }
};

// Windowed-sinc rate conversion; cutoff tracks the lower Nyquist.
inline std::vector<float> resample(const std::vector<float>& x, int sr_in, int sr_out) {
  if (sr_in <= 0 || sr_out <= 0) throw std::invalid_argument("resample: bad rates");
  if (sr_in == sr_out) return x;
  if (x.empty()) return {};
  double ratio = static_cast<double>(sr_out) / sr_in;
  double fc = std::min(1.0, ratio);
  constexpr int kZeroCrossings = 32;
  double half_width = kZeroCrossings / fc;
  size_t n_in = x.size();
  size_t n_out = static_cast<size_t>(std::llround(static_cast<double>(n_in) * ratio));
  std::vector<float> y(n_out);
  for (size_t n = 0; n < n_out; ++n) {
    double t = static_cast<double>(n) / ratio;
    long k0 = static_cast<long>(std::ceil(t - half_width));
    long k1 = static_cast<long>(std::floor(t + half_width));
    k0 = std::max(k0, 0L);
    k1 = std::min(k1, static_cast<long>(n_in) - 1);
    double acc = 0.0;
    for (long k = k0; k <= k1; ++k) {
      double u = t - static_cast<double>(k);
      double w = 0.5 * (1.0 + std::cos(M_PI * u / half_width));
      double v = fc * u;
      double s = v == 0.0 ? 1.0 : std::sin(M_PI * v) / (M_PI * v);
      acc += static_cast<double>(x[static_cast<size_t>(k)]) * fc * s * w;
    }
    y[n] = static_cast<float>(acc);
  }
  return y;
}

inline std::vector<float> load_utterance(const UtteranceRecord& rec) {
  WavData w = read_wav(rec.path);
  if (w.sample_rate != kCorpusSampleRate) return resample(w.samples, w.sample_rate, kCorpusSampleRate);
  return std::move(w.samples);
}

struct ScanResult {
  CorpusManifest manifest;
  std::vector<std::string> skipped;
};

// Walks root for wav files; the path component `speaker_depth` levels below
// root names the speaker. Undecodable files land in the skip list.
inline ScanResult scan_corpus_full(const std::string& root, Partition partition, int speaker_depth = 0) {
  namespace fs = std::filesystem;
  if (!fs::exists(root) || !fs::is_directory(root))
    throw std::runtime_error("scan_corpus: not a directory: " + root);

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.string() < b.string(); });

  ScanResult out;
  out.manifest.partition = partition;
  for (const auto& p : files) {
    fs::path rel = fs::relative(p, root);
    std::vector<std::string> comps;
    for (const auto& c : rel) comps.push_back(c.string());
    if (static_cast<int>(comps.size()) < speaker_depth + 2) {
      out.skipped.push_back(p.string() + " (no speaker directory at depth " +
                            std::to_string(speaker_depth) + ")");
      continue;
    }
    try {
      WavData w = read_wav(p.string());
      if (w.samples.empty()) throw std::runtime_error("empty audio");
      double dur = static_cast<double>(w.samples.size()) / w.sample_rate;
      out.manifest.records.push_back(
          {fs::absolute(p).string(), comps[static_cast<size_t>(speaker_depth)], dur, kCorpusSampleRate});
    } catch (const std::exception& ex) {
      out.skipped.push_back(p.string() + " (" + ex.what() + ")");
    }
  }
  if (out.manifest.records.empty())
    throw std::runtime_error("scan_corpus: no decodable wav files under " + root);
  out.manifest.rebuild_indices();
  return out;
}

inline CorpusManifest scan_corpus(const std::string& root, Partition partition, int speaker_depth = 0) {
  return scan_corpus_full(root, partition, speaker_depth).manifest;
}

inline void save_manifest(const CorpusManifest& m, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("save_manifest: cannot write " + path);
  for (const auto& r : m.records) {
    nlohmann::json j = {{"path", r.path},
                        {"speaker_id", r.speaker_id},
                        {"duration", r.duration},
                        {"sample_rate", r.sample_rate}};
    f << j.dump() << "\n";
  }
  nlohmann::json side = {{"partition", partition_name(m.partition)},
                         {"speakers", nlohmann::json::object()}};
  for (const auto& kv : m.speaker_index) side["speakers"][kv.first] = kv.second;
  std::ofstream g(path + ".speakers.json", std::ios::trunc);
  if (!g) throw std::runtime_error("save_manifest: cannot write speaker index for " + path);
  g << side.dump(2) << "\n";
}

inline CorpusManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_manifest: cannot read " + path);
  CorpusManifest m;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    m.records.push_back({j.at("path").get<std::string>(), j.at("speaker_id").get<std::string>(),
                         j.at("duration").get<double>(), j.at("sample_rate").get<int>()});
  }
  std::ifstream g(path + ".speakers.json");
  if (g) {
    nlohmann::json side;
    g >> side;
    m.partition = partition_from_name(side.at("partition").get<std::string>());
    for (auto it = side.at("speakers").begin(); it != side.at("speakers").end(); ++it)
      m.speaker_index[it.key()] = it.value().get<int>();
  }
  m.rebuild_indices();
  return m;
}

// Decoded-audio cache for repeated segment draws. Single-threaded use.
struct UtteranceCache {
  std::unordered_map<std::string, std::vector<float>> waves;

  const std::vector<float>& get(const UtteranceRecord& rec) {
    auto it = waves.find(rec.path);
    if (it != waves.end()) return it->second;
    return waves.emplace(rec.path, load_utterance(rec)).first->second;
  }
};

// Fixed-length excerpt from a random utterance of the speaker. Shorter
// utterances wrap around; longer ones yield a contiguous slice.
inline std::vector<float> draw_segment(const CorpusManifest& m, const std::string& speaker_id,
                                       double length_s, uint64_t rng_seed, UtteranceCache* cache = nullptr) {
  auto it = m.by_speaker.find(speaker_id);
  if (it == m.by_speaker.end() || it->second.empty())
    throw std::out_of_range("draw_segment: unknown speaker " + speaker_id);
  size_t need = static_cast<size_t>(std::llround(length_s * kCorpusSampleRate));
  if (need == 0) throw std::invalid_argument("draw_segment: zero length");

  Rng rng(splitmix64(rng_seed ^ 0xC0FFEEULL));
  const auto& rows = it->second;
  const UtteranceRecord& rec = m.records[rows[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(rows.size())))]];

  UtteranceCache local;
  const std::vector<float>& utt = (cache ? *cache : local).get(rec);
  if (utt.empty()) throw std::runtime_error("draw_segment: empty utterance " + rec.path);

  std::vector<float> seg(need);
  size_t n = utt.size();
  if (n >= need) {
    size_t start = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(n - need + 1)));
    std::copy(utt.begin() + static_cast<long>(start), utt.begin() + static_cast<long>(start + need), seg.begin());
  } else {
    size_t start = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(n)));
    for (size_t i = 0; i < need; ++i) seg[i] = utt[(start + i) % n];
  }
  return seg;
}

}  // namespace nsx

#endif  // NSX_CORPUS_CORPUS_HPP_
