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

// Release gate: ten numbered checks over the toolkit, from dataset-level
// statistics through gradient correctness to end-to-end reproducibility.
// Each check prints one PASS/FAIL line plus indented detail; the process
// exits nonzero if any requested check fails. Budgets are sized for a
// single CPU core.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nsx/acoustics/bank.hpp"
#include "nsx/acoustics/rir.hpp"
#include "nsx/acoustics/scene.hpp"
#include "nsx/ad/gradcheck.hpp"
#include "nsx/corpus/corpus.hpp"
#include "nsx/corpus/synth.hpp"
#include "nsx/mixer/mixer.hpp"
#include "nsx/model/extractor.hpp"
#include "nsx/model/model.hpp"
#include "nsx/pipeline/pipeline.hpp"
#include "nsx/signal/metrics.hpp"
#include "nsx/signal/stft.hpp"
#include "nsx/trainer/evaluate.hpp"
#include "nsx/trainer/trainer.hpp"

namespace nsx {
namespace {

namespace fs = std::filesystem;

struct Line {
  bool ok;
  std::string text;
};

struct Detail {
  std::vector<Line> lines;
  bool all_ok = true;

  void add(bool ok, const std::string& text) {
    lines.push_back({ok, text});
    all_ok = all_ok && ok;
  }
  void note(const std::string& text) { lines.push_back({true, text}); }
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

// Shared tiny model: shortened DFT (win 32 -> 17 bins) keeps every path
// exercised while a full forward/backward stays in the millisecond range.
constexpr StftConfig kTinyStft{32, 16};

ModelConfig tiny_model() {
  ModelConfig mc;
  mc.C = 1;
  mc.D = 4;
  mc.E = 2;
  mc.L = 2;
  mc.I = 4;
  mc.J = 1;
  mc.H = 4;
  mc.F = kTinyStft.bins();
  return mc;
}

// Reduced-width extractor and baselines for the trained checks.
ModelConfig desk_model(ModelKind kind, int n_classes) {
  ModelConfig mc;
  mc.kind = kind;
  mc.C = 2;
  mc.D = 8;
  mc.E = 2;
  mc.L = 2;
  mc.I = 4;
  mc.J = 2;
  mc.H = 16;
  mc.N = n_classes;
  mc.F = 33;
  mc.lstm_layers = 2;
  mc.lstm_width = 48;
  mc.init_seed = 1;
  return mc;
}
constexpr StftConfig kDeskStft{64, 32};

std::string ensure_corpus(const std::string& dir, int speakers, int utts, double lo, double hi,
                          uint64_t seed) {
  if (!fs::exists(fs::path(dir) / "spk_000")) {
    generate_synthetic_corpus(dir, speakers, utts, lo, hi, seed);
  }
  return dir;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// 1. Mixture statistics: mean mixture SI-SDR per speaker count, full recipe.

Detail check_mixture_stats(const std::string& work) {
  Detail d;
  const int kScenes = 125;
  const int kPerCond = 500;
  const double kTol = 1.5;
  const double targets[3] = {5.02, 0.34, -2.48};

  std::string croot = ensure_corpus(work + "/c1/corpus", 24, 4, 5.5, 7.0, 77);
  CorpusManifest man = scan_corpus(croot, Partition::kTrain);

  std::vector<RoomScene> scenes;
  std::vector<std::vector<std::vector<float>>> rirs(kScenes);
  for (int i = 0; i < kScenes; ++i) {
    RoomScene s = sample_room_scene(1000 + i, ReverbRegime::kNormal);
    for (int k = 0; k < kSourcesPerScene; ++k) rirs[i].push_back(generate_rir(s, k).samples);
    scenes.push_back(std::move(s));
  }
  d.note(fmt("%d scenes rendered, %d mixtures per condition", kScenes, kPerCond));

  UtteranceCache cache;
  double means[3] = {0, 0, 0};
  for (int n = 2; n <= 4; ++n) {
    std::vector<double> vals;
    vals.reserve(kPerCond);
    for (int i = 0; i < kPerCond; ++i) {
      int si = i % kScenes;
      RirLookup lookup = [&](int pos) -> const std::vector<float>& { return rirs[si][pos]; };
      ScenarioConfig cfg;
      cfg.n_speakers = n;
      cfg.mixture_length = 5.0;
      MixtureSample m = make_mixture(scenes[si], man, cfg, splitmix64(0xABCDULL + i * 131 + n),
                                     lookup, "s" + std::to_string(si), &cache);
      vals.push_back(si_sdr(m.mixture, m.target));
    }
    means[n - 2] = mean_of(vals);
    double sq = 0.0;
    for (double v : vals) sq += (v - means[n - 2]) * (v - means[n - 2]);
    double sem = std::sqrt(sq / (vals.size() - 1.0) / vals.size());
    bool ok = std::abs(means[n - 2] - targets[n - 2]) <= kTol;
    d.add(ok, fmt("%d speakers: mean mixture SI-SDR %+.3f dB (sem %.3f), want %+.2f +/- %.1f",
                  n, means[n - 2], sem, targets[n - 2], kTol));
  }
  d.add(means[0] > means[1] && means[1] > means[2],
        fmt("ordering %+.2f > %+.2f > %+.2f", means[0], means[1], means[2]));
  return d;
}

// ---------------------------------------------------------------------------
// 2. RIR physics: Schroeder decay matches the scene RT60; causal onset.

Detail check_rir_physics(const std::string&) {
  Detail d;
  const int kScenes = 40;
  int total = 0, rt_ok = 0, causal_ok = 0;
  for (int i = 0; i < kScenes; ++i) {
    RoomScene s = sample_room_scene(500 + i, ReverbRegime::kNormal);
    for (int k = 0; k < kSourcesPerScene; ++k) {
      ImpulseResponse ir = generate_rir(s, k);
      ++total;
      double est = estimate_rt60(ir.samples);
      if (std::abs(est - s.rt60) <= 0.2 * s.rt60) ++rt_ok;
      auto onset = static_cast<size_t>(std::floor(ir.source_distance / 343.0 * 16000.0));
      bool causal = true;
      for (size_t t = 0; t < onset && t < ir.samples.size(); ++t) {
        if (ir.samples[t] != 0.0f) {
          causal = false;
          break;
        }
      }
      if (causal) ++causal_ok;
    }
  }
  d.add(rt_ok * 10 >= total * 9,
        fmt("RT60 within 20%%: %d/%d (need >= %d)", rt_ok, total, (total * 9 + 9) / 10));
  d.add(causal_ok == total, fmt("zero energy before the direct path: %d/%d", causal_ok, total));
  return d;
}

// ---------------------------------------------------------------------------
// 3. STFT round trip at the analysis defaults.

Detail check_stft_roundtrip(const std::string&) {
  Detail d;
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<float> x(5 * kCorpusSampleRate);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    ComplexSpectrogram spec = stft(x);
    std::vector<float> y = istft(spec, static_cast<int64_t>(x.size()));
    for (size_t t = 0; t < x.size(); ++t)
      worst = std::max(worst, static_cast<double>(std::abs(y[t] - x[t])));
  }
  d.add(worst < 1e-6, fmt("100 random 5 s signals, max abs error %.3g (< 1e-6)", worst));
  return d;
}

// ---------------------------------------------------------------------------
// 4. SI-SDR kernel identities.

Detail check_sisdr_kernel(const std::string&) {
  Detail d;
  Rng rng(99);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    std::vector<float> est(4000), ref(4000);
    for (auto& v : est) v = static_cast<float>(rng.normal());
    for (auto& v : ref) v = static_cast<float>(rng.normal());
    double base = si_sdr(est, ref);
    // powers of two rescale float samples losslessly, so any drift here is
    // the kernel's own scale sensitivity rather than input quantization
    for (float a : {0.25f, 4.0f, 1024.0f}) {
      std::vector<float> scaled(est);
      for (auto& v : scaled) v *= a;
      worst = std::max(worst, std::abs(si_sdr(scaled, ref) - base));
    }
  }
  d.add(worst < 1e-6, fmt("scale invariance, worst drift %.3g dB (< 1e-6)", worst));

  double hand = si_sdr({1.0f, 1.0f}, {1.0f, 0.0f});
  d.add(hand == 0.0, fmt("[1,1] estimated against [1,0] gives %+.17g dB (exact 0)", hand));

  std::vector<float> mix(4000), tgt(4000);
  for (auto& v : mix) v = static_cast<float>(rng.normal());
  for (auto& v : tgt) v = static_cast<float>(rng.normal());
  double imp = si_sdr_improvement(mix, mix, tgt);
  d.add(imp == 0.0, fmt("mixture scored as its own estimate improves %+.17g dB (exact 0)", imp));
  return d;
}

// ---------------------------------------------------------------------------
// 5. Architecture contracts: shapes, attention row sums, ablation variants.

Detail check_architecture(const std::string&) {
  Detail d;
  ModelConfig mc = tiny_model();
  mc.N = 3;

  Rng rng(4242);
  auto random_spec = [&](int64_t T) {
    Tensor<float> x({2, mc.F, T});
    for (int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform(-1, 1));
    return x;
  };

  NearSpeakerExtractor<float> net(mc);
  for (int64_t T : {int64_t{1}, int64_t{10}, int64_t{626}}) {
    std::vector<int> probe;
    net.attention_probe = &probe;
    ad::Graph<float> g;
    auto out = net.forward(g, g.leaf(random_spec(T)));
    const Tensor<float>& y = g.val(out.spec);
    bool shape_ok = y.rank() == 3 && y.dim(0) == 2 && y.dim(1) == mc.F && y.dim(2) == T;
    d.add(shape_ok, fmt("T=%lld: output %s for input [2,%d,%lld]",
                        static_cast<long long>(T), y.shape_str().c_str(), mc.F,
                        static_cast<long long>(T)));

    double worst = 0.0;
    int64_t rows = 0;
    for (int a : probe) {
      const Tensor<float>& A = g.val(a);
      int64_t R = A.dim(0), Cc = A.dim(1);
      for (int64_t r = 0; r < R; ++r) {
        double s = 0.0;
        for (int64_t c = 0; c < Cc; ++c) s += A[r * Cc + c];
        worst = std::max(worst, std::abs(s - 1.0));
      }
      rows += R;
    }
    d.add(worst < 1e-5, fmt("T=%lld: %lld attention rows, worst |sum-1| %.3g",
                            static_cast<long long>(T), static_cast<long long>(rows), worst));
  }
  net.attention_probe = nullptr;

  struct Variant {
    const char* name;
    bool se, t, f;
  };
  for (const Variant& v : {Variant{"w/o SE", true, false, false},
                           Variant{"w/o T-Att", false, true, false},
                           Variant{"w/o F-Att", false, false, true}}) {
    ModelConfig vc = mc;
    vc.ablate_se = v.se;
    vc.ablate_t_att = v.t;
    vc.ablate_f_att = v.f;
    bool ok = false;
    std::string note;
    try {
      NearSpeakerExtractor<float> vn(vc);
      ad::Graph<float> g;
      auto out = vn.forward(g, g.leaf(random_spec(10)));
      const Tensor<float>& y = g.val(out.spec);
      ok = y.dim(0) == 2 && y.dim(1) == mc.F && y.dim(2) == 10;
      note = fmt("%s: constructs, forward %s", v.name, y.shape_str().c_str());
    } catch (const std::exception& e) {
      note = fmt("%s: %s", v.name, e.what());
    }
    d.add(ok, note);
  }
  return d;
}

// ---------------------------------------------------------------------------
// 6. Gradients of the multitask loss against central differences.

Detail check_gradients(const std::string&) {
  Detail d;
  ModelConfig mc = tiny_model();
  mc.N = 4;
  NearSpeakerExtractor<double> net(mc);
  auto& ps = net.params();

  auto tone = [](int n, double f, uint64_t seed) {
    Rng r(seed);
    std::vector<float> x(n);
    for (int i = 0; i < n; ++i)
      x[i] = static_cast<float>(0.4 * std::sin(2.0 * M_PI * f * i / kCorpusSampleRate) +
                                0.05 * r.normal());
    return x;
  };
  auto mixf = tone(180, 520.0, 31);
  auto tgtf = tone(180, 260.0, 32);
  std::vector<double> target(tgtf.begin(), tgtf.end());
  Tensor<float> specf = stft(mixf, kTinyStft).ri;
  Tensor<double> spec(specf.shape());
  for (int64_t i = 0; i < spec.size(); ++i) spec[i] = specf[i];

  auto build = [&](ad::Graph<double>& g, ad::ParamStore<double>&) {
    auto f = net.forward(g, g.leaf(spec.clone()));
    ModelOutput<double> out{f.spec, f.logits};
    return multitask_loss(g, out, target, 2, 0.1, kTinyStft);
  };

  const char* names[] = {"enc.conv.weight",        "block0.se.head.weight",
                         "block0.fuse.rnn.fwd.W",  "block0.fuse.deconv.weight",
                         "block0.tatt.out.weight", "block0.fatt.head0.q.weight",
                         "block0.tatt.head1.k.weight", "dec.conv.weight",
                         "dec.conv.bias",          "block0.fuse.norm.gamma",
                         "block0.se.res1.conv.weight", "block0.fuse.restore.weight"};
  Rng pick(7);
  std::vector<std::pair<int, int64_t>> coords;
  for (const char* n : names) {
    int id = ps.find(n);
    if (id < 0) {
      d.add(false, fmt("parameter %s not found", n));
      return d;
    }
    coords.emplace_back(id, static_cast<int64_t>(pick.uniform(0, 1) * 0.999 *
                                                 static_cast<double>(ps.at(id).value.size())));
  }
  auto entries = ad::gradcheck<double>(ps, build, coords, 1e-5);
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.rel_err);
  d.add(worst < 1e-3,
        fmt("%zu parameters, worst relative error %.3g (< 1e-3)", entries.size(), worst));
  return d;
}

// ---------------------------------------------------------------------------
// 7. Learning smoke: the tiny model overfits 4 fixed 2-speaker samples.

Detail check_overfit(const std::string& work) {
  Detail d;
  std::string root = work + "/c7";
  std::string croot = ensure_corpus(root + "/corpus", 6, 2, 1.2, 1.8, 404);
  CorpusManifest man = scan_corpus(croot, Partition::kTrain);

  std::vector<SceneRecord> scenes =
      build_rir_bank(root + "/bank", 4, 2200, ReverbRegime::kNormal);
  ScenarioConfig scfg;
  scfg.n_speakers = 2;
  scfg.mixture_length = 0.4;
  auto pool = build_dataset(scenes, root + "/bank", man, scfg, 16, 1, root + "/data");

  // fixed rule: keep the 4 hardest of the 16 drawn, so the smoke test
  // exercises separation rather than pass-through reconstruction
  std::vector<std::pair<double, size_t>> ranked;
  for (size_t i = 0; i < pool.size(); ++i) {
    WavData mix = read_wav(pool[i].mixture_path);
    WavData tgt = read_wav(pool[i].target_path);
    ranked.emplace_back(si_sdr(mix.samples, tgt.samples), i);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<DatasetEntry> entries;
  double mix_sisdr = 0.0;
  for (int i = 0; i < 4; ++i) {
    entries.push_back(pool[ranked[i].second]);
    mix_sisdr += ranked[i].first;
  }
  mix_sisdr /= 4.0;
  d.note(fmt("4 fixed samples (hardest of 16 drawn), mean mixture SI-SDR %+.2f dB", mix_sisdr));

  ModelConfig mc = tiny_model();
  mc.N = man.num_speakers();
  Model<float> model(mc);

  TrainConfig tc;
  tc.batch_size = 4;  // one optimizer step per epoch
  tc.max_epochs = 500;
  tc.patience = 500;
  tc.lr = 3e-3;
  tc.seed = 1;
  FitResult fr = fit(model, entries, entries, tc, root + "/train", kTinyStft);

  double best = -1e9;
  int best_step = -1;
  for (const auto& h : fr.history) {
    double imp = h.dev_sisdr - mix_sisdr;
    if (imp > best) {
      best = imp;
      best_step = h.epoch + 1;
    }
  }
  d.add(best >= 5.0, fmt("train SI-SDRi reached %+.2f dB at step %d (need >= 5 within 500)",
                         best, best_step));
  d.add(fr.history.back().train_loss < fr.history.front().train_loss,
        fmt("loss step 500 %.3f < step 1 %.3f", fr.history.back().train_loss,
            fr.history.front().train_loss));
  return d;
}

// ---------------------------------------------------------------------------
// Shared data + training for the two comparative checks.

struct DeskData {
  std::vector<DatasetEntry> train, dev, test;
  int n_classes = 0;
};

DeskData desk_data(const std::string& root, bool intruded_mix) {
  DeskData dd;
  std::string croot = ensure_corpus(root + "/corpus", 24, 4, 2.5, 4.0, 505);
  CorpusManifest man = scan_corpus(croot, Partition::kTrain);
  dd.n_classes = man.num_speakers();

  auto scenes = build_rir_bank(root + "/bank", 16, 3100, ReverbRegime::kNormal);
  ScenarioConfig cfg;
  cfg.n_speakers = 2;
  cfg.mixture_length = 0.8;

  if (!intruded_mix) {
    dd.train = build_dataset(scenes, root + "/bank", man, cfg, 480, 9000, root + "/train");
    dd.dev = build_dataset(scenes, root + "/bank", man, cfg, 96, 9100, root + "/dev");
    dd.test = dd.dev;
    return dd;
  }

  ScenarioConfig icfg = cfg;
  icfg.intruded = true;
  icfg.intruder_length = {0.2, 0.6};
  dd.train = build_dataset(scenes, root + "/bank", man, cfg, 240, 9000, root + "/train_n");
  auto ti = build_dataset(scenes, root + "/bank", man, icfg, 240, 9200, root + "/train_i");
  dd.train.insert(dd.train.end(), ti.begin(), ti.end());
  dd.dev = build_dataset(scenes, root + "/bank", man, cfg, 48, 9100, root + "/dev_n");
  auto di = build_dataset(scenes, root + "/bank", man, icfg, 48, 9300, root + "/dev_i");
  dd.dev.insert(dd.dev.end(), di.begin(), di.end());
  dd.test = build_dataset(scenes, root + "/bank", man, icfg, 160, 9400, root + "/test_i");
  return dd;
}

double trained_mean_sisdri(const ModelConfig& mc, const DeskData& dd, const std::string& out,
                           const std::vector<DatasetEntry>& eval_set, int epochs) {
  Model<float> model(mc);
  TrainConfig tc;
  tc.batch_size = 8;
  tc.max_epochs = epochs;
  tc.patience = epochs;  // fixed budget, no early exit
  tc.seed = 1;
  fit(model, dd.train, dd.dev, tc, out, kDeskStft, [&](const EpochRecord& r) {
    std::printf("    [%s] epoch %d loss %.3f dev %.3f\n", fs::path(out).filename().c_str(),
                r.epoch, r.train_loss, r.dev_sisdr);
    std::fflush(stdout);
  });
  Model<float> best = load_model(out + "/best.ckpt");
  EvalReport rep = evaluate(&best, eval_set, kDeskStft);
  double acc = 0.0;
  int n = 0;
  for (const auto& s : rep.samples) {
    if (!s.ok) continue;
    acc += s.sisdri;
    ++n;
  }
  return acc / std::max(1, n);
}

// 8. Trained comparison: extractor vs U-Net and BLSTM at one budget.

Detail check_comparison(const std::string& work) {
  Detail d;
  std::string root = work + "/c8";
  DeskData dd = desk_data(root, false);
  d.note(fmt("%zu train / %zu dev samples, 6 epochs, identical budgets",
             dd.train.size(), dd.dev.size()));

  double ext = trained_mean_sisdri(desk_model(ModelKind::kNearSpeakerExtractor, dd.n_classes),
                                   dd, root + "/m_ext", dd.dev, 6);
  d.note(fmt("extractor dev SI-SDRi %+.3f dB", ext));
  double unet = trained_mean_sisdri(desk_model(ModelKind::kUnetBaseline, 0), dd,
                                    root + "/m_unet", dd.dev, 6);
  d.note(fmt("u-net dev SI-SDRi %+.3f dB", unet));
  double lstm = trained_mean_sisdri(desk_model(ModelKind::kBlstmBaseline, 0), dd,
                                    root + "/m_lstm", dd.dev, 6);
  d.note(fmt("blstm dev SI-SDRi %+.3f dB", lstm));

  d.add(ext > unet, fmt("extractor %+.3f > u-net %+.3f", ext, unet));
  d.add(ext > lstm, fmt("extractor %+.3f > blstm %+.3f", ext, lstm));
  return d;
}

// 9. Intrusion robustness: self-enrollment on vs ablated, intruded test.

Detail check_intrusion(const std::string& work) {
  Detail d;
  std::string root = work + "/c9";
  DeskData dd = desk_data(root, true);
  d.note(fmt("%zu mixed train samples, %zu intruded test samples",
             dd.train.size(), dd.test.size()));

  double with_se = trained_mean_sisdri(desk_model(ModelKind::kNearSpeakerExtractor, dd.n_classes),
                                       dd, root + "/m_se", dd.test, 6);
  d.note(fmt("self-enrollment on: %+.3f dB SI-SDRi", with_se));
  ModelConfig ab = desk_model(ModelKind::kNearSpeakerExtractor, dd.n_classes);
  ab.ablate_se = true;
  double without_se = trained_mean_sisdri(ab, dd, root + "/m_nose", dd.test, 6);
  d.note(fmt("self-enrollment ablated: %+.3f dB SI-SDRi", without_se));

  d.add(with_se >= without_se,
        fmt("intruded test SI-SDRi %+.3f (on) >= %+.3f (ablated)", with_se, without_se));
  return d;
}

// ---------------------------------------------------------------------------
// 10. Reproducibility: a full pipeline rerun is byte-identical.

Detail check_reproducibility(const std::string& work) {
  Detail d;
  std::string root = work + "/c10";
  fs::remove_all(root);

  ExperimentConfig cfg;
  cfg.experiment_id = "repro";
  cfg.output_root = root;
  cfg.acoustics.scene_count = 2;
  cfg.acoustics.seed = 21;
  cfg.corpus.root = "";
  cfg.corpus.speakers = 6;
  cfg.corpus.utterances = 2;
  cfg.corpus.min_seconds = 0.9;
  cfg.corpus.max_seconds = 1.4;
  cfg.corpus.seed = 22;
  cfg.scenario.mixture_length = 0.5;
  cfg.scenario.seed = 23;
  cfg.scenario.train = {"train", 8, 2, false, "normal"};
  cfg.scenario.dev = {"dev", 3, 2, false, "normal"};
  cfg.scenario.test = {{"test", 4, 2, false, "normal"}, {"test_faint", 3, 2, false, "faint"}};
  cfg.model = tiny_model();
  cfg.stft = kTinyStft;
  cfg.trainer.batch_size = 4;
  cfg.trainer.max_epochs = 2;
  cfg.trainer.seed = 9;
  cfg.validate();

  run_pipeline(cfg, false, "", nullptr);

  std::vector<std::string> tracked = {"corpus/manifest.jsonl", "eval/summary.csv",
                                      "train/history.jsonl", "provenance.json"};
  for (const auto* split : {"train", "dev", "test", "test_faint"})
    tracked.push_back(std::string("mix/") + split + "/samples.jsonl");
  for (const auto& t : cfg.scenario.test)
    tracked.push_back("eval/" + t.name + "/per_sample.jsonl");
  for (const auto& e : fs::directory_iterator(cfg.out_dir() + "/rir")) {
    if (e.is_directory()) tracked.push_back("rir/" + e.path().filename().string() + "/scenes.jsonl");
  }

  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };

  std::map<std::string, std::string> first;
  for (const auto& rel : tracked) {
    std::string p = cfg.out_dir() + "/" + rel;
    if (!fs::exists(p)) {
      d.add(false, "missing after first run: " + rel);
      return d;
    }
    first[rel] = slurp(p);
  }

  run_pipeline(cfg, true, "", nullptr);

  int same = 0;
  for (const auto& rel : tracked) {
    std::string now = slurp(cfg.out_dir() + "/" + rel);
    if (now == first[rel]) {
      ++same;
    } else {
      d.add(false, "differs after rerun: " + rel);
    }
  }
  d.add(same == static_cast<int>(tracked.size()),
        fmt("%d/%zu tracked artifacts byte-identical after a forced rerun", same,
            tracked.size()));
  return d;
}

}  // namespace
}  // namespace nsx

int main(int argc, char** argv) {
  CLI::App app{"nsx release checks"};
  int criterion = 0;
  std::string work = "/tmp/nsx_acceptance";
  app.add_option("--criterion", criterion, "check number 1-10, 0 runs all")
      ->check(CLI::Range(0, 10));
  app.add_option("--work", work, "scratch directory for generated data");
  CLI11_PARSE(app, argc, argv);

  using Check = nsx::Detail (*)(const std::string&);
  struct Entry {
    const char* name;
    Check run;
  };
  const Entry table[] = {
      {"mixture statistics", nsx::check_mixture_stats},
      {"rir physics", nsx::check_rir_physics},
      {"stft round trip", nsx::check_stft_roundtrip},
      {"si-sdr kernel", nsx::check_sisdr_kernel},
      {"architecture contracts", nsx::check_architecture},
      {"gradient correctness", nsx::check_gradients},
      {"learning smoke", nsx::check_overfit},
      {"model comparison", nsx::check_comparison},
      {"intrusion robustness", nsx::check_intrusion},
      {"reproducibility", nsx::check_reproducibility},
  };

  std::filesystem::create_directories(work);
  bool all_ok = true;
  for (int i = 0; i < 10; ++i) {
    if (criterion != 0 && criterion != i + 1) continue;
    nsx::Detail d;
    try {
      d = table[i].run(work);
    } catch (const std::exception& e) {
      d.add(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %d (%s): %s\n", i + 1, table[i].name, d.all_ok ? "PASS" : "FAIL");
    for (const auto& line : d.lines)
      std::printf("  %s %s\n", line.ok ? "-" : "x", line.text.c_str());
    std::fflush(stdout);
    all_ok = all_ok && d.all_ok;
  }
  return all_ok ? 0 : 1;
}
