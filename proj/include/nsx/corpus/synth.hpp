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

#ifndef NSX_CORPUS_SYNTH_HPP_
#define NSX_CORPUS_SYNTH_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "nsx/core/rng.hpp"
#include "nsx/core/wav.hpp"

namespace nsx {

// Formant-filtered pulse trains standing in for recorded speech. Each
// speaker gets a pitch base and a vowel inventory; utterances alternate
// voiced syllables, fricative-like noise bursts, and short pauses.
namespace synth_detail {

struct Resonator {
  double b0 = 1.0, a1 = 0.0, a2 = 0.0;
  double z1 = 0.0, z2 = 0.0;

  void design(double freq_hz, double bw_hz, int fs) {
    double r = std::exp(-M_PI * bw_hz / fs);
    double w = 2.0 * M_PI * freq_hz / fs;
    a1 = -2.0 * r * std::cos(w);
    a2 = r * r;
    b0 = (1.0 - r) * std::sqrt(1.0 + r * r - 2.0 * r * std::cos(2.0 * w));
  }

  double step(double x) {
    double y = b0 * x - a1 * z1 - a2 * z2;
    z2 = z1;
    z1 = y;
    return y;
  }
};

struct SpeakerVoice {
  double f0_base = 0.0;
  // three formant targets per vowel, a few vowels per speaker
  std::vector<std::array<double, 3>> vowels;

  static SpeakerVoice sample(Rng& rng) {
    SpeakerVoice v;
    v.f0_base = rng.uniform(85.0, 255.0);
    int n_vowels = 3 + static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < n_vowels; ++i) {
      v.vowels.push_back({rng.uniform(280.0, 900.0), rng.uniform(950.0, 2300.0), rng.uniform(2350.0, 3300.0)});
    }
    return v;
  }
};

}  // namespace synth_detail

inline std::vector<float> synthesize_utterance(const synth_detail::SpeakerVoice& voice, double seconds,
                                               Rng& rng, int fs = 16000) {
  using synth_detail::Resonator;
  size_t n = static_cast<size_t>(seconds * fs);
  std::vector<float> out(n, 0.0f);

  Resonator f1, f2, f3;
  double phase = 0.0;
  size_t pos = 0;
  while (pos < n) {
    double kind = rng.uniform();
    size_t seg_len = static_cast<size_t>(rng.uniform(0.08, 0.28) * fs);
    seg_len = std::min(seg_len, n - pos);
    if (kind < 0.15) {  // pause
      pos += seg_len;
      continue;
    }
    if (kind < 0.30) {  // fricative-ish noise burst
      Resonator hp;
      hp.design(rng.uniform(2500.0, 5000.0), 1500.0, fs);
      for (size_t i = 0; i < seg_len; ++i) {
        double env = std::sin(M_PI * static_cast<double>(i) / seg_len);
        out[pos + i] = static_cast<float>(0.12 * env * hp.step(rng.normal()));
      }
      pos += seg_len;
      continue;
    }
    // voiced syllable: glottal pulse train through three formants
    const auto& vowel = voice.vowels[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(voice.vowels.size())))];
    double f0 = voice.f0_base * rng.uniform(0.85, 1.15);
    double drift = rng.uniform(-0.25, 0.25);  // pitch slope over the syllable
    f1.design(vowel[0] * rng.uniform(0.95, 1.05), 80.0, fs);
    f2.design(vowel[1] * rng.uniform(0.95, 1.05), 110.0, fs);
    f3.design(vowel[2] * rng.uniform(0.95, 1.05), 150.0, fs);
    for (size_t i = 0; i < seg_len; ++i) {
      double frac = static_cast<double>(i) / seg_len;
      double inst = f0 * (1.0 + drift * frac);
      phase += inst / fs;
      double exc = 0.0;
      if (phase >= 1.0) {
        phase -= 1.0;
        exc = 1.0;
      }
      exc += 0.01 * rng.normal();
      double env = std::sin(M_PI * frac);
      double sample = f1.step(exc) + 0.7 * f2.step(exc) + 0.4 * f3.step(exc);
      out[pos + i] = static_cast<float>(0.35 * env * sample);
    }
    pos += seg_len;
  }

  float peak = 1e-9f;
  for (float v : out) peak = std::max(peak, std::abs(v));
  float gain = 0.5f / peak;
  for (float& v : out) v *= gain;
  return out;
}

// Writes root/spk_SSS/utt_UU.wav for n_speakers x utts_per_speaker files.
inline void generate_synthetic_corpus(const std::string& root, int n_speakers, int utts_per_speaker,
                                      double min_seconds, double max_seconds, uint64_t seed) {
  namespace fs = std::filesystem;
  Rng top(splitmix64(seed ^ 0x5EEDC0DEULL));
  for (int s = 0; s < n_speakers; ++s) {
    Rng spk_rng = top.fork(static_cast<uint64_t>(s));
    auto voice = synth_detail::SpeakerVoice::sample(spk_rng);
    char dir[32];
    std::snprintf(dir, sizeof(dir), "spk_%03d", s);
    fs::create_directories(fs::path(root) / dir);
    for (int u = 0; u < utts_per_speaker; ++u) {
      double secs = spk_rng.uniform(min_seconds, max_seconds);
      auto wave = synthesize_utterance(voice, secs, spk_rng);
      char name[32];
      std::snprintf(name, sizeof(name), "utt_%03d.wav", u);
      write_wav_pcm16((fs::path(root) / dir / name).string(), wave, 16000);
    }
  }
}

}  // namespace nsx

#endif  // NSX_CORPUS_SYNTH_HPP_
