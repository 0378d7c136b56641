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
#include <fstream>
#include <vector>

#include "nsx/ad/gradcheck.hpp"
#include "nsx/trainer/evaluate.hpp"
#include "nsx/trainer/trainer.hpp"

using namespace nsx;

namespace {

namespace fs = std::filesystem;

const StftConfig kTinyStft{16, 8};  // 9 bins, light enough for gradient sweeps

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.C = 1;
  cfg.D = 4;
  cfg.E = 2;
  cfg.L = 2;
  cfg.I = 4;
  cfg.J = 1;
  cfg.H = 4;
  cfg.N = 2;
  cfg.F = kTinyStft.bins();
  cfg.init_seed = 3;
  return cfg;
}

std::vector<float> tone_burst(size_t len, double freq, double rate, uint64_t seed) {
  Rng rng(seed);
  std::vector<float> x(len);
  double phase = rng.uniform(0.0, 2.0 * M_PI);
  for (size_t i = 0; i < len; ++i) {
    double t = static_cast<double>(i) / rate;
    x[i] = static_cast<float>(0.25 * std::sin(2.0 * M_PI * freq * t + phase) +
                              0.05 * rng.uniform(-1.0, 1.0));
  }
  return x;
}

// 2-speaker toy set: distinct tones as target/interferer, mixture = sum.
// Writes wavs + entries so the disk-facing loaders are exercised too.
std::vector<DatasetEntry> write_toy_dataset(const std::string& dir, int count, size_t len,
                                            uint64_t seed) {
  fs::create_directories(dir);
  std::vector<DatasetEntry> entries;
  for (int i = 0; i < count; ++i) {
    int label = i % 2;
    double f0 = label == 0 ? 300.0 : 520.0;
    auto target = tone_burst(len, f0, kCorpusSampleRate, seed + static_cast<uint64_t>(i) * 17);
    auto interf =
        tone_burst(len, 1200.0 - f0, kCorpusSampleRate, seed + 1000 + static_cast<uint64_t>(i));
    std::vector<float> mixture(len);
    for (size_t k = 0; k < len; ++k) mixture[k] = target[k] + 0.8f * interf[k];

    DatasetEntry e;
    e.sample_id = "toy_" + std::to_string(i);
    fs::path sdir = fs::path(dir) / e.sample_id;
    fs::create_directories(sdir);
    e.mixture_path = (sdir / "mixture.wav").string();
    e.target_path = (sdir / "target.wav").string();
    write_wav_f32(e.mixture_path, mixture, kCorpusSampleRate);
    write_wav_f32(e.target_path, target, kCorpusSampleRate);
    e.target_speaker_label = label;
    e.scene_id = "toy";
    e.n_speakers = 2;
    e.intruded = false;
    e.regime = "normal";
    e.seed = seed + static_cast<uint64_t>(i);
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace

TEST_CASE("cosine schedule hits both endpoints", "[trainer]") {
  CHECK(cosine_lr(0.001, 0, 100) == Catch::Approx(0.001).epsilon(1e-12));
  CHECK(cosine_lr(0.001, 100, 100) == Catch::Approx(0.00001).margin(1e-9));
  double mid = cosine_lr(0.001, 50, 100);
  CHECK(mid == Catch::Approx(0.5 * (0.001 + 0.00001)).margin(1e-9));
  CHECK(cosine_lr(0.001, 25, 100) > mid);
  CHECK(cosine_lr(0.001, 75, 100) < mid);
}

TEST_CASE("train config json round trip and validation", "[trainer]") {
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.gamma = 0.25;
  cfg.seed = 99;
  TrainConfig back = train_config_from_json(train_config_json(cfg));
  CHECK(train_config_json(back) == train_config_json(cfg));
  TrainConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("uniform logits add ln(10) per block and gamma isolates", "[trainer]") {
  const StftConfig scfg = kTinyStft;
  std::vector<float> target = tone_burst(200, 400.0, kCorpusSampleRate, 5);
  auto mix = tone_burst(200, 700.0, kCorpusSampleRate, 6);
  Tensor<float> spec = stft(mix, scfg).ri;

  ad::Graph<float> g;
  ModelOutput<float> out;
  out.spec = g.leaf(spec.clone());
  for (int c = 0; c < 3; ++c) out.logits.push_back(g.leaf(Tensor<float>({10})));

  int with_ce = multitask_loss(g, out, target, 4, 0.1, scfg);
  ModelOutput<float> no_ce{out.spec, {}};
  int without = multitask_loss(g, no_ce, target, 4, 0.1, scfg);
  double delta = g.val(with_ce)[0] - g.val(without)[0];
  CHECK(delta == Catch::Approx(0.1 * 3.0 * std::log(10.0)).margin(1e-5));

  // gamma zero must reduce to the distortion term exactly
  int gz = multitask_loss(g, out, target, 4, 0.0, scfg);
  CHECK(g.val(gz)[0] == g.val(without)[0]);

  CHECK_THROWS_AS(multitask_loss(g, out, target, 10, 0.1, scfg), std::out_of_range);
  CHECK_THROWS_AS(multitask_loss(g, out, target, -1, 0.1, scfg), std::out_of_range);
}

TEST_CASE("perfect prediction saturates the distortion clamp", "[trainer]") {
  const StftConfig scfg = kTinyStft;
  std::vector<float> target = tone_burst(300, 350.0, kCorpusSampleRate, 8);
  Tensor<float> spec = stft(target, scfg).ri;
  ad::Graph<float> g;
  ModelOutput<float> out;
  out.spec = g.leaf(spec.clone());
  int loss = multitask_loss(g, out, target, -1, 0.1, scfg);
  CHECK(g.val(loss)[0] == -60.0f);
}

TEST_CASE("multitask loss gradient matches finite differences", "[trainer]") {
  ModelConfig mcfg = tiny_model_config();
  mcfg.H = 3;
  NearSpeakerExtractor<double> net(mcfg);
  auto& ps = net.params();
  const StftConfig scfg = kTinyStft;

  auto mixf = tone_burst(48, 500.0, kCorpusSampleRate, 21);
  auto tgtf = tone_burst(48, 300.0, kCorpusSampleRate, 22);
  std::vector<double> target(tgtf.begin(), tgtf.end());
  Tensor<float> specf = stft(mixf, scfg).ri;
  Tensor<double> spec(specf.shape());
  for (int64_t i = 0; i < spec.size(); ++i) spec[i] = specf[i];

  auto build = [&](ad::Graph<double>& g, ad::ParamStore<double>&) {
    auto f = net.forward(g, g.leaf(spec.clone()));
    ModelOutput<double> out{f.spec, f.logits};
    return multitask_loss(g, out, target, 1, 0.1, scfg);
  };

  std::vector<std::pair<int, int64_t>> coords;
  const char* names[] = {"enc.conv.weight",        "block0.se.head.weight",
                         "block0.fuse.rnn.fwd.W",  "block0.fuse.deconv.weight",
                         "block0.tatt.out.weight", "block0.fatt.head0.q.weight",
                         "dec.conv.weight",        "dec.conv.bias",
                         "block0.fuse.norm.gamma", "block0.se.res0.conv.weight"};
  Rng pick(77);
  for (const char* n : names) {
    int id = ps.find(n);
    REQUIRE(id >= 0);
    coords.emplace_back(id, static_cast<int64_t>(pick.uniform(0, 1) * 0.999 *
                                                 static_cast<double>(ps.at(id).value.size())));
  }
  auto entries = ad::gradcheck<double>(ps, build, coords, 1e-4);
  for (const auto& e : entries) {
    INFO("param " << ps.at(e.param).name << "[" << e.index << "] analytic " << e.analytic
                  << " numeric " << e.numeric);
    CHECK(e.rel_err < 1e-3);
  }
}

TEST_CASE("adamw drives a quadratic to its minimum", "[trainer]") {
  ad::ParamStore<float> ps;
  Rng rng(1);
  Tensor<float> init({6});
  for (int64_t i = 0; i < 6; ++i) init[i] = static_cast<float>(rng.uniform(-2, 2));
  int pid = ps.add("p", std::move(init));
  std::vector<float> goal = {0.5f, -1.0f, 2.0f, 0.0f, -0.25f, 1.5f};

  AdamW opt(ps, 0.0);
  for (int step = 0; step < 400; ++step) {
    ps.zero_grad();
    ad::Graph<float> g;
    int p = g.param(ps.at(pid));
    Tensor<float> tgt({6});
    for (int64_t i = 0; i < 6; ++i) tgt[i] = goal[static_cast<size_t>(i)];
    int diff = ad::add(g, p, ad::scale(g, g.leaf(std::move(tgt)), -1.0f));
    int loss = ad::mean_all(g, ad::hadamard(g, diff, diff));
    g.backward(loss);
    opt.step(0.05);
  }
  for (int64_t i = 0; i < 6; ++i)
    CHECK(ps.at(pid).value[i] == Catch::Approx(goal[static_cast<size_t>(i)]).margin(1e-2));
  CHECK(opt.state().step == 400);
}

TEST_CASE("weight decay pulls parameters toward zero", "[trainer]") {
  ad::ParamStore<float> ps;
  int pid = ps.add("p", Tensor<float>::full({1}, 1.0f));
  AdamW opt(ps, 0.5);
  // zero gradient: the only force is the decoupled decay term
  ps.zero_grad();
  opt.step(0.1);
  CHECK(ps.at(pid).value[0] == Catch::Approx(1.0f - 0.1f * 0.5f * 1.0f).margin(1e-6));
}

TEST_CASE("gradient clipping caps the global norm", "[trainer]") {
  ad::ParamStore<float> ps;
  int a = ps.add("a", Tensor<float>({3}));
  int b = ps.add("b", Tensor<float>({2}));
  ps.at(a).grad.fill(10.0f);
  ps.at(b).grad.fill(-10.0f);
  auto [norm, clipped] = clip_grad_norm(ps, 5.0);
  CHECK(clipped);
  CHECK(norm == Catch::Approx(10.0 * std::sqrt(5.0)).margin(1e-6));
  double after = 0;
  for (int64_t i = 0; i < 3; ++i) after += ps.at(a).grad[i] * ps.at(a).grad[i];
  for (int64_t i = 0; i < 2; ++i) after += ps.at(b).grad[i] * ps.at(b).grad[i];
  CHECK(std::sqrt(after) == Catch::Approx(5.0).margin(1e-4));

  ps.at(a).grad.fill(0.1f);
  ps.at(b).grad.fill(0.1f);
  auto [norm2, clipped2] = clip_grad_norm(ps, 5.0);
  CHECK_FALSE(clipped2);
  CHECK(ps.at(a).grad[0] == 0.1f);
  (void)norm2;
}

TEST_CASE("early stopping halts after the patience window", "[trainer]") {
  EarlyStop s{5};
  CHECK_FALSE(s.update(0, 1.0));  // first epoch sets the best
  for (int e = 1; e <= 5; ++e) CHECK_FALSE(s.update(e, 1.0));
  CHECK(s.update(6, 1.0));  // sixth stagnant epoch trips the stop
  CHECK(s.best_epoch == 0);

  EarlyStop t{2};
  CHECK_FALSE(t.update(0, 1.0));
  CHECK_FALSE(t.update(1, 2.0));  // improvement resets the window
  CHECK_FALSE(t.update(2, 2.0));
  CHECK_FALSE(t.update(3, 2.0));
  CHECK(t.update(4, 2.0));
}

TEST_CASE("overfitting four samples drives the loss down", "[trainer]") {
  fs::path dir = fs::temp_directory_path() / "nsx_trainer_overfit";
  fs::remove_all(dir);
  auto entries = write_toy_dataset(dir.string(), 4, 1600, 12);

  ModelConfig mcfg = tiny_model_config();
  Model<float> model(mcfg);
  TrainConfig tcfg;
  tcfg.batch_size = 4;
  tcfg.max_epochs = 40;
  tcfg.patience = 40;
  tcfg.seed = 5;
  auto res = fit(model, entries, entries, tcfg, (dir / "run").string(), kTinyStft);

  REQUIRE(res.history.size() >= 10);
  CHECK(res.history.back().train_loss < res.history.front().train_loss);
  CHECK(res.best_dev_sisdr > res.history.front().dev_sisdr - 1e-9);
  CHECK(fs::exists(res.best_path));
  CHECK(fs::exists(res.last_path));

  // history file is one json record per epoch with the full field set
  std::ifstream hist(res.history_path);
  REQUIRE(hist.good());
  std::string line;
  int lines = 0;
  while (std::getline(hist, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    CHECK(j.contains("epoch"));
    CHECK(j.contains("train_loss"));
    CHECK(j.contains("dev_sisdr"));
    CHECK(j.contains("lr"));
    CHECK(j.contains("clip_events"));
    ++lines;
  }
  CHECK(lines == static_cast<int>(res.history.size()));

  // best checkpoint reloads and reproduces the recorded dev metric
  LoadedCheckpoint ck = load_checkpoint(res.best_path);
  CHECK(ck.extra["dev_sisdr"].get<double>() == Catch::Approx(res.best_dev_sisdr));
  Model<float> best = load_model(res.best_path);
  CHECK(mean_dev_sisdr(best, entries, kTinyStft) == Catch::Approx(res.best_dev_sisdr).margin(1e-6));
  fs::remove_all(dir);
}

TEST_CASE("training replays bit-identically under a fixed seed", "[trainer]") {
  fs::path dir = fs::temp_directory_path() / "nsx_trainer_replay";
  fs::remove_all(dir);
  auto entries = write_toy_dataset(dir.string(), 3, 800, 77);

  TrainConfig tcfg;
  tcfg.batch_size = 2;
  tcfg.max_epochs = 3;
  tcfg.patience = 10;
  tcfg.seed = 21;

  ModelConfig mcfg = tiny_model_config();
  Model<float> m1(mcfg), m2(mcfg);
  auto r1 = fit(m1, entries, entries, tcfg, (dir / "a").string(), kTinyStft);
  auto r2 = fit(m2, entries, entries, tcfg, (dir / "b").string(), kTinyStft);
  REQUIRE(r1.history.size() == r2.history.size());
  for (size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].dev_sisdr == r2.history[i].dev_sisdr);
    CHECK(r1.history[i].lr == r2.history[i].lr);
  }
  fs::remove_all(dir);
}

TEST_CASE("non-finite loss aborts with a diagnostic checkpoint", "[trainer]") {
  fs::path dir = fs::temp_directory_path() / "nsx_trainer_nan";
  fs::remove_all(dir);
  auto entries = write_toy_dataset(dir.string(), 2, 400, 9);

  ModelConfig mcfg = tiny_model_config();
  Model<float> model(mcfg);
  model.params().at(0).value[0] = std::numeric_limits<float>::quiet_NaN();
  TrainConfig tcfg;
  tcfg.batch_size = 2;
  tcfg.max_epochs = 2;
  CHECK_THROWS_AS(fit(model, entries, entries, tcfg, (dir / "run").string(), kTinyStft),
                  std::runtime_error);
  CHECK(fs::exists(dir / "run" / "diverged.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("evaluating the mixture as estimate gives zero improvement", "[trainer]") {
  fs::path dir = fs::temp_directory_path() / "nsx_trainer_eval";
  fs::remove_all(dir);
  auto entries = write_toy_dataset(dir.string(), 4, 600, 31);
  // fake a second scenario cell so grouping is visible
  entries[2].n_speakers = 3;
  entries[2].intruded = true;
  entries[3].n_speakers = 3;
  entries[3].intruded = true;
  entries[3].regime = "faint";

  EvalReport rep = evaluate(nullptr, entries, kTinyStft, (dir / "report").string());
  REQUIRE(rep.evaluated == 4);
  CHECK(rep.failures == 0);
  CHECK(rep.mean_sisdri == 0.0);
  REQUIRE(rep.groups.size() == 3);
  for (const auto& g : rep.groups) CHECK(g.mean_sisdri == 0.0);

  CHECK(fs::exists(dir / "report" / "per_sample.jsonl"));
  CHECK(fs::exists(dir / "report" / "summary.csv"));
  CHECK(fs::exists(dir / "report" / "summary.txt"));

  // purity: a second run writes byte-identical artifacts
  std::ifstream c1(dir / "report" / "summary.csv");
  std::string first((std::istreambuf_iterator<char>(c1)), std::istreambuf_iterator<char>());
  evaluate(nullptr, entries, kTinyStft, (dir / "report").string());
  std::ifstream c2(dir / "report" / "summary.csv");
  std::string second((std::istreambuf_iterator<char>(c2)), std::istreambuf_iterator<char>());
  CHECK(first == second);
  fs::remove_all(dir);
}

TEST_CASE("evaluation records per-sample failures without dying", "[trainer]") {
  fs::path dir = fs::temp_directory_path() / "nsx_trainer_evalfail";
  fs::remove_all(dir);
  auto entries = write_toy_dataset(dir.string(), 2, 500, 55);
  entries[1].mixture_path = (dir / "missing.wav").string();

  EvalReport rep = evaluate(nullptr, entries, kTinyStft);
  CHECK(rep.evaluated == 1);
  CHECK(rep.failures == 1);
  REQUIRE(rep.samples.size() == 2);
  CHECK_FALSE(rep.samples[1].ok);
  CHECK(!rep.samples[1].error.empty());
  fs::remove_all(dir);
}
