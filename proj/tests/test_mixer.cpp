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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "nsx/acoustics/bank.hpp"
#include "nsx/core/rng.hpp"
#include "nsx/corpus/synth.hpp"
#include "nsx/mixer/mixer.hpp"
#include "nsx/signal/metrics.hpp"

using namespace nsx;
namespace fs = std::filesystem;

namespace {

struct MixFixture {
  fs::path corpus_root;
  fs::path bank_dir;
  CorpusManifest manifest;
  std::vector<SceneRecord> scenes;

  MixFixture() {
    corpus_root = fs::temp_directory_path() / "nsx_mix_corpus";
    bank_dir = fs::temp_directory_path() / "nsx_mix_bank";
    fs::remove_all(corpus_root);
    fs::remove_all(bank_dir);
    generate_synthetic_corpus(corpus_root.string(), 6, 2, 3.0, 6.0, 21);
    manifest = scan_corpus(corpus_root.string(), Partition::kTrain);
    build_rir_bank(bank_dir.string(), 2, 31, ReverbRegime::kFaint);
    scenes = load_rir_bank(bank_dir.string());
  }
};

MixFixture& fixture() {
  static MixFixture f;
  return f;
}

}  // namespace

TEST_CASE("set_rms hits the target level", "[mixer]") {
  Rng g(3);
  std::vector<float> w(8000);
  for (auto& v : w) v = static_cast<float>(g.normal() * 0.1);
  auto y = set_rms(w, -25.0);
  REQUIRE(rms_db(y) == Catch::Approx(-25.0).margin(1e-6));

  auto z = set_rms(w, rms_db(w));
  for (size_t i = 0; i < w.size(); ++i) REQUIRE(z[i] == Catch::Approx(w[i]).margin(1e-6));

  // closed form: -10 dB signal to -20 dB scales by 10^(-1/2)
  std::vector<float> c(100, 0.0f);
  c[0] = 1.0f;
  auto cur = rms_db(c);
  auto moved = set_rms(c, cur - 10.0);
  REQUIRE(moved[0] == Catch::Approx(std::pow(10.0, -0.5)).margin(1e-6));

  std::vector<float> zeros(100, 0.0f);
  REQUIRE_THROWS(set_rms(zeros, -20.0));
}

TEST_CASE("render_source identity and delay kernels", "[mixer]") {
  Rng g(8);
  std::vector<float> dry(16000);
  for (auto& v : dry) v = static_cast<float>(g.uniform(-0.5, 0.5));

  std::vector<float> ident = {1.0f};
  auto y = render_source(dry, ident);
  REQUIRE(y.size() == dry.size());
  for (size_t i = 0; i < y.size(); ++i) REQUIRE(y[i] == Catch::Approx(dry[i]).margin(1e-6));

  std::vector<float> delay(161, 0.0f);
  delay[160] = 1.0f;
  auto d = render_source(dry, delay);
  REQUIRE(d.size() == dry.size());
  for (size_t i = 0; i < 160; ++i) REQUIRE(std::abs(d[i]) < 1e-6);
  for (size_t i = 160; i < d.size(); ++i) REQUIRE(d[i] == Catch::Approx(dry[i - 160]).margin(1e-6));

  REQUIRE_THROWS(render_source(dry, std::vector<float>{}));
}

TEST_CASE("render_source matches direct convolution oracle", "[mixer]") {
  Rng g(14);
  std::vector<float> dry(16000), rir(4800);
  for (auto& v : dry) v = static_cast<float>(g.normal() * 0.2);
  for (auto& v : rir) v = static_cast<float>(g.normal() * std::exp(-3.0 * (&v - rir.data()) / 4800.0));
  auto fast = render_source(dry, rir);
  double ref_energy = 0, err_energy = 0;
  for (size_t n = 0; n < dry.size(); ++n) {
    double acc = 0;
    size_t kmax = std::min(rir.size() - 1, n);
    for (size_t k = 0; k <= kmax; ++k) acc += static_cast<double>(dry[n - k]) * rir[k];
    ref_energy += acc * acc;
    double d = fast[n] - acc;
    err_energy += d * d;
  }
  REQUIRE(std::sqrt(err_energy / ref_energy) < 1e-6);
}

namespace {

RirLookup bank_lookup(std::vector<std::vector<float>>& store, const MixFixture& f, size_t scene_idx) {
  store.clear();
  for (int k = 0; k < 5; ++k)
    store.push_back(load_rir_wave(f.bank_dir.string(), f.scenes[scene_idx], k));
  return [&store](int pos) -> const std::vector<float>& { return store.at(static_cast<size_t>(pos)); };
}

}  // namespace

TEST_CASE("two speaker mixture satisfies construction invariants", "[mixer]") {
  auto& f = fixture();
  std::vector<std::vector<float>> rirs;
  auto lookup = bank_lookup(rirs, f, 0);
  ScenarioConfig cfg;
  cfg.n_speakers = 2;
  MixtureSample s = make_mixture(f.scenes[0].scene, f.manifest, cfg, 1234, lookup, f.scenes[0].scene_id);

  REQUIRE(s.stems.size() == 2);
  REQUIRE(s.mixture.size() == 80000);
  REQUIRE(s.target.size() == 80000);
  REQUIRE(s.target == s.stems[0]);
  REQUIRE(s.target_speaker_label == f.manifest.label_of(s.stem_speakers[0]));
  REQUIRE(s.stem_speakers[0] != s.stem_speakers[1]);

  const RoomScene& scene = f.scenes[0].scene;
  REQUIRE(scene.near_mask[static_cast<size_t>(s.stem_positions[0])]);
  REQUIRE_FALSE(scene.near_mask[static_cast<size_t>(s.stem_positions[1])]);
  REQUIRE(scene.source_distance(s.stem_positions[0]) < 1.5);
  REQUIRE(scene.source_distance(s.stem_positions[1]) >= 1.5);

  // sample-exact stem additivity, same accumulation order as the mixer
  for (size_t i = 0; i < s.mixture.size(); ++i) {
    float sum = 0.0f;
    for (const auto& st : s.stems) sum += st[i];
    REQUIRE(s.mixture[i] == sum);
  }
}

TEST_CASE("mixtures are bit-deterministic under the seed", "[mixer]") {
  auto& f = fixture();
  std::vector<std::vector<float>> rirs;
  auto lookup = bank_lookup(rirs, f, 1);
  ScenarioConfig cfg;
  cfg.n_speakers = 3;
  MixtureSample a = make_mixture(f.scenes[1].scene, f.manifest, cfg, 777, lookup);
  MixtureSample b = make_mixture(f.scenes[1].scene, f.manifest, cfg, 777, lookup);
  REQUIRE(a.mixture == b.mixture);
  REQUIRE(a.stems == b.stems);
  REQUIRE(a.target_speaker_label == b.target_speaker_label);
  MixtureSample c = make_mixture(f.scenes[1].scene, f.manifest, cfg, 778, lookup);
  REQUIRE(a.mixture != c.mixture);
}

TEST_CASE("intruded mixtures add a late near stem", "[mixer]") {
  auto& f = fixture();
  std::vector<std::vector<float>> rirs;
  auto lookup = bank_lookup(rirs, f, 0);
  ScenarioConfig cfg;
  cfg.n_speakers = 3;
  cfg.intruded = true;
  MixtureSample s = make_mixture(f.scenes[0].scene, f.manifest, cfg, 999, lookup);

  REQUIRE(s.stems.size() == 4);
  const RoomScene& scene = f.scenes[0].scene;
  REQUIRE(scene.near_mask[static_cast<size_t>(s.stem_positions[0])]);
  REQUIRE_FALSE(scene.near_mask[static_cast<size_t>(s.stem_positions[1])]);
  REQUIRE_FALSE(scene.near_mask[static_cast<size_t>(s.stem_positions[2])]);
  REQUIRE(scene.near_mask[static_cast<size_t>(s.stem_positions[3])]);
  REQUIRE(s.stem_positions[3] != s.stem_positions[0]);

  // label stays with the original near target
  REQUIRE(s.target_speaker_label == f.manifest.label_of(s.stem_speakers[0]));

  // intruder active window is 1..3 s at the end
  REQUIRE(s.intruder_onset_s >= 2.0 - 1e-9);
  REQUIRE(s.intruder_onset_s <= 4.0 + 1e-9);
  size_t onset = static_cast<size_t>(std::llround(s.intruder_onset_s * 16000));
  for (size_t i = 0; i < onset; ++i) REQUIRE(s.stems[3][i] == 0.0f);
  double tail = 0;
  for (size_t i = onset; i < s.stems[3].size(); ++i) tail += std::abs(s.stems[3][i]);
  REQUIRE(tail > 0.0);

  // all five speakers distinct
  for (size_t a = 0; a < s.stem_speakers.size(); ++a)
    for (size_t b = a + 1; b < s.stem_speakers.size(); ++b)
      REQUIRE(s.stem_speakers[a] != s.stem_speakers[b]);
}

TEST_CASE("make_mixture validates configuration", "[mixer]") {
  auto& f = fixture();
  std::vector<std::vector<float>> rirs;
  auto lookup = bank_lookup(rirs, f, 0);
  ScenarioConfig cfg;
  cfg.n_speakers = 5;  // needs 4 far positions, scenes have 3
  REQUIRE_THROWS(make_mixture(f.scenes[0].scene, f.manifest, cfg, 1, lookup));
  cfg.n_speakers = 1;
  REQUIRE_THROWS(make_mixture(f.scenes[0].scene, f.manifest, cfg, 1, lookup));
  cfg = ScenarioConfig{};
  cfg.n_speakers = 2;
  cfg.mixture_length = -1.0;
  REQUIRE_THROWS(make_mixture(f.scenes[0].scene, f.manifest, cfg, 1, lookup));
}

TEST_CASE("build_dataset writes a replayable manifest", "[mixer]") {
  auto& f = fixture();
  fs::path out = fs::temp_directory_path() / "nsx_test_dataset";
  fs::remove_all(out);
  ScenarioConfig cfg;
  cfg.n_speakers = 2;
  auto entries = build_dataset(f.scenes, f.bank_dir.string(), f.manifest, cfg, 4, 55, out.string());
  REQUIRE(entries.size() == 4);

  auto loaded = load_dataset(out.string());
  REQUIRE(loaded.size() == 4);
  for (size_t i = 0; i < loaded.size(); ++i) {
    REQUIRE(loaded[i].sample_id == entries[i].sample_id);
    REQUIRE(loaded[i].n_speakers == 2);
    REQUIRE_FALSE(loaded[i].intruded);
    WavData mix = read_wav(loaded[i].mixture_path);
    WavData tgt = read_wav(loaded[i].target_path);
    REQUIRE(mix.samples.size() == 80000);
    REQUIRE(tgt.samples.size() == 80000);
    std::vector<float> sum(mix.samples.size(), 0.0f);
    for (const auto& sp : loaded[i].stem_paths) {
      WavData stem = read_wav(sp);
      for (size_t k = 0; k < sum.size(); ++k) sum[k] += stem.samples[k];
    }
    for (size_t k = 0; k < sum.size(); ++k) REQUIRE(mix.samples[k] == sum[k]);
  }

  // scenes cycle
  REQUIRE(loaded[0].scene_id == f.scenes[0].scene_id);
  REQUIRE(loaded[1].scene_id == f.scenes[1].scene_id);
  REQUIRE(loaded[2].scene_id == f.scenes[0].scene_id);
  fs::remove_all(out);
}

TEST_CASE("build_dataset reruns reproduce mixtures bit-exactly", "[mixer]") {
  auto& f = fixture();
  fs::path out1 = fs::temp_directory_path() / "nsx_test_ds_a";
  fs::path out2 = fs::temp_directory_path() / "nsx_test_ds_b";
  fs::remove_all(out1);
  fs::remove_all(out2);
  ScenarioConfig cfg;
  cfg.n_speakers = 2;
  cfg.intruded = true;
  build_dataset(f.scenes, f.bank_dir.string(), f.manifest, cfg, 3, 91, out1.string());
  build_dataset(f.scenes, f.bank_dir.string(), f.manifest, cfg, 3, 91, out2.string());
  auto a = load_dataset(out1.string());
  auto b = load_dataset(out2.string());
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(read_wav(a[i].mixture_path).samples == read_wav(b[i].mixture_path).samples);
    REQUIRE(a[i].target_speaker_label == b[i].target_speaker_label);
    REQUIRE(a[i].seed == b[i].seed);
  }
  fs::remove_all(out1);
  fs::remove_all(out2);
}
