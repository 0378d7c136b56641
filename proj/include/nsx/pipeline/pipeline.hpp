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

#ifndef NSX_PIPELINE_PIPELINE_HPP_
#define NSX_PIPELINE_PIPELINE_HPP_

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsx/acoustics/bank.hpp"
#include "nsx/core/rng.hpp"
#include "nsx/corpus/corpus.hpp"
#include "nsx/corpus/synth.hpp"
#include "nsx/mixer/mixer.hpp"
#include "nsx/model/model.hpp"
#include "nsx/pipeline/experiment.hpp"
#include "nsx/pipeline/plot.hpp"
#include "nsx/trainer/evaluate.hpp"
#include "nsx/trainer/trainer.hpp"

namespace nsx {

// ---- content hashing ----
// Stages are cached on a hash of everything that determines their output:
// the relevant config sections plus the hashes of upstream stages. All
// generation is pure in (config, seed), so config-level hashing is an exact
// cache key and avoids re-reading gigabytes of WAV.

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string content_hash(const nlohmann::json& j) { return hash_hex(fnv1a64(j.dump())); }

inline std::string file_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("file_hash: cannot read " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0)
    h = fnv1a64(std::string_view(buf, static_cast<size_t>(f.gcount())), h);
  return hash_hex(h);
}

// ---- stage records ----

struct StageRecord {
  std::string stage;
  std::string hash;
  std::vector<std::string> outputs;  // relative to the experiment directory
};

inline std::string stage_record_path(const std::string& out_dir, const std::string& stage) {
  return out_dir + "/stages/" + stage + ".json";
}

inline void commit_stage(const std::string& out_dir, const StageRecord& rec) {
  std::filesystem::create_directories(out_dir + "/stages");
  std::ofstream f(stage_record_path(out_dir, rec.stage), std::ios::trunc);
  if (!f) throw std::runtime_error("commit_stage: cannot write record for " + rec.stage);
  f << nlohmann::json{{"stage", rec.stage}, {"hash", rec.hash}, {"outputs", rec.outputs}}.dump(2)
    << "\n";
}

// Fresh means: a record exists, its hash matches, and every declared output
// is still on disk.
inline bool stage_is_fresh(const std::string& out_dir, const std::string& stage,
                           const std::string& hash) {
  std::ifstream f(stage_record_path(out_dir, stage));
  if (!f) return false;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (...) {
    return false;
  }
  if (j.value("hash", "") != hash) return false;
  for (const auto& o : j.value("outputs", std::vector<std::string>{}))
    if (!std::filesystem::exists(std::filesystem::path(out_dir) / o)) return false;
  return true;
}

struct StageRun {
  std::string stage;
  std::string hash;
  bool cached = false;
};

namespace pipeline_detail {

inline std::vector<std::string> regimes_needed(const ScenarioSection& s) {
  std::set<std::string> set{s.train.regime, s.dev.regime};
  for (const auto& t : s.test) set.insert(t.regime);
  return {set.begin(), set.end()};
}

inline uint64_t split_seed(uint64_t scenario_seed, const std::string& split_name) {
  return splitmix64(scenario_seed ^ fnv1a64(split_name));
}

inline nlohmann::json mix_stage_input(const ExperimentConfig& cfg, const MixSpec& m,
                                      const std::string& rir_hash, const std::string& corpus_hash) {
  return {{"split", mix_spec_json(m)},
          {"mixture_length", cfg.scenario.mixture_length},
          {"far_db_lo", cfg.scenario.far_db_lo},
          {"far_db_hi", cfg.scenario.far_db_hi},
          {"seed", split_seed(cfg.scenario.seed, m.name)},
          {"rir", rir_hash},
          {"corpus", corpus_hash}};
}

// Executes body unless a fresh record exists; commits the record on success.
// A failing stage names itself and leaves earlier records intact so a rerun
// resumes where it stopped.
inline bool exec_stage(const std::string& out_dir, bool force, std::FILE* log,
                       std::vector<StageRun>& runs, const std::string& name,
                       const std::string& hash, const std::vector<std::string>& outputs,
                       const std::function<void()>& body) {
  if (!force && stage_is_fresh(out_dir, name, hash)) {
    if (log) std::fprintf(log, "[%s] cached (%s)\n", name.c_str(), hash.c_str());
    runs.push_back({name, hash, true});
    return false;
  }
  if (log) std::fprintf(log, "[%s] running\n", name.c_str());
  try {
    body();
  } catch (const std::exception& e) {
    throw std::runtime_error("stage '" + name + "' failed: " + e.what() +
                             " (earlier stage records are kept; fix and rerun to resume)");
  }
  commit_stage(out_dir, {name, hash, outputs});
  runs.push_back({name, hash, false});
  return true;
}

// SE classification needs a class count; when left at zero it is sized from
// the training labels.
inline ModelConfig resolve_model(const ExperimentConfig& cfg,
                                 const std::vector<DatasetEntry>& train_entries) {
  ModelConfig mc = cfg.model;
  if (mc.kind == ModelKind::kNearSpeakerExtractor && !mc.ablate_se && mc.N == 0) {
    int max_label = -1;
    for (const auto& e : train_entries) max_label = std::max(max_label, e.target_speaker_label);
    mc.N = max_label + 1;
  }
  return mc;
}

inline void train_into(const ExperimentConfig& cfg, const ModelConfig& mc,
                       const std::vector<DatasetEntry>& train_entries,
                       const std::vector<DatasetEntry>& dev_entries, const std::string& train_dir,
                       std::FILE* log) {
  Model<float> model(mc);
  FitResult fr = fit(model, train_entries, dev_entries, cfg.trainer, train_dir, cfg.stft,
                     [&](const EpochRecord& r) {
                       if (log)
                         std::fprintf(log,
                                      "  epoch %d: train_loss %.4f dev_sisdr %.3f lr %.2e clip %d\n",
                                      r.epoch, r.train_loss, r.dev_sisdr, r.lr, r.clip_events);
                     });
  nlohmann::json fitj{{"best_epoch", fr.best_epoch},
                      {"best_dev_sisdr", fr.best_dev_sisdr},
                      {"epochs_run", fr.epochs_run},
                      {"early_stopped", fr.early_stopped},
                      {"model", model_config_json(mc)}};
  std::ofstream f(train_dir + "/fit.json", std::ios::trunc);
  f << fitj.dump(2) << "\n";
}

struct SplitEval {
  std::string split;
  EvalReport report;
};

inline void write_combined_eval(const std::string& eval_dir, const std::vector<SplitEval>& evals) {
  std::filesystem::create_directories(eval_dir);
  std::ofstream csv(eval_dir + "/summary.csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("write_combined_eval: cannot write summary.csv");
  csv << "split,group,n_speakers,intruded,regime,count,mixture_si_sdr,si_sdr,si_sdri\n";
  char buf[256];
  for (const auto& se : evals) {
    for (const auto& g : se.report.groups) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%s,%d,%.4f,%.4f,%.4f\n", se.split.c_str(),
                    group_key(g.n_speakers, g.intruded, g.regime).c_str(), g.n_speakers,
                    g.intruded ? 1 : 0, g.regime.c_str(), g.count, g.mean_mix_sisdr, g.mean_sisdr,
                    g.mean_sisdri);
      csv << buf;
    }
  }
  std::ofstream txt(eval_dir + "/summary.txt", std::ios::trunc);
  txt << "evaluation summary\n";
  for (const auto& se : evals) {
    std::snprintf(buf, sizeof(buf), "%-14s mean SI-SDR %8.3f dB   mean SI-SDRi %8.3f dB   (%d samples, %d failed)\n",
                  se.split.c_str(), se.report.mean_sisdr, se.report.mean_sisdri,
                  se.report.evaluated, se.report.failures);
    txt << buf;
  }
}

inline std::vector<EpochRecord> read_history(const std::string& path) {
  std::ifstream f(path);
  std::vector<EpochRecord> recs;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    EpochRecord r;
    r.epoch = j.value("epoch", 0);
    r.train_loss = j.value("train_loss", 0.0);
    r.dev_sisdr = j.value("dev_sisdr", 0.0);
    r.lr = j.value("lr", 0.0);
    r.clip_events = j.value("clip_events", 0);
    recs.push_back(r);
  }
  return recs;
}

inline void write_run_plots(const std::string& out_dir, const std::string& train_dir,
                            const std::vector<SplitEval>& evals) {
  std::filesystem::create_directories(out_dir + "/plots");
  auto hist = read_history(train_dir + "/history.jsonl");
  if (!hist.empty()) {
    PlotSeries loss{"train_loss", {}}, dev{"dev_si_sdr", {}};
    for (const auto& r : hist) {
      loss.y.push_back(r.train_loss);
      dev.y.push_back(r.dev_sisdr);
    }
    write_line_chart(out_dir + "/plots/history", "training history", "epoch", {loss, dev});
  }
  std::vector<std::pair<std::string, double>> bars;
  for (const auto& se : evals)
    for (const auto& g : se.report.groups)
      bars.emplace_back(se.split + "/" + group_key(g.n_speakers, g.intruded, g.regime),
                        g.mean_sisdri);
  if (!bars.empty())
    write_bar_chart(out_dir + "/plots/eval_sisdri", "SI-SDR improvement by condition (dB)", bars);
}

}  // namespace pipeline_detail

struct PipelineResult {
  std::string out_dir;
  std::vector<StageRun> stages;
  std::string corpus_manifest;
  std::map<std::string, std::string> mix_dirs;  // split name -> dataset dir
  std::string train_dir;
  std::string eval_dir;
};

// Runs rir -> corpus -> mix -> train -> evaluate with per-stage caching.
// until: stop after that stage ("" runs everything). force: ignore caches.
inline PipelineResult run_pipeline(const ExperimentConfig& cfg, bool force = false,
                                   const std::string& until = "", std::FILE* log = stdout) {
  namespace fs = std::filesystem;
  using namespace pipeline_detail;
  cfg.validate();
  static const std::set<std::string> kStages{"", "rir", "corpus", "mix", "train", "evaluate"};
  if (!kStages.count(until)) throw std::invalid_argument("run_pipeline: unknown stage " + until);

  PipelineResult res;
  res.out_dir = cfg.out_dir();
  fs::create_directories(res.out_dir);
  save_experiment_config(cfg, res.out_dir + "/config.json");

  auto stage = [&](const std::string& name, const std::string& hash,
                   const std::vector<std::string>& outputs, const std::function<void()>& body) {
    return exec_stage(res.out_dir, force, log, res.stages, name, hash, outputs, body);
  };

  // rir: one bank per regime referenced anywhere in the scenario
  auto regimes = regimes_needed(cfg.scenario);
  std::string rir_hash = content_hash({{"scene_count", cfg.acoustics.scene_count},
                                       {"seed", cfg.acoustics.seed},
                                       {"regimes", regimes}});
  std::vector<std::string> rir_outputs;
  for (const auto& r : regimes) rir_outputs.push_back("rir/" + r + "/scenes.jsonl");
  stage("rir", rir_hash, rir_outputs, [&] {
    for (const auto& r : regimes) {
      uint64_t seed = splitmix64(cfg.acoustics.seed ^ fnv1a64(r));
      build_rir_bank(res.out_dir + "/rir/" + r, cfg.acoustics.scene_count, seed,
                     regime_from_name(r), [&](int done, int total) {
                       if (log && (done % 10 == 0 || done == total))
                         std::fprintf(log, "  rir/%s: %d/%d scenes\n", r.c_str(), done, total);
                     });
    }
  });
  if (until == "rir") return res;

  // corpus: scan an existing tree, or synthesize a surrogate one first
  res.corpus_manifest = res.out_dir + "/corpus/manifest.jsonl";
  std::string corpus_hash = content_hash({{"root", cfg.corpus.root},
                                          {"speakers", cfg.corpus.speakers},
                                          {"utterances", cfg.corpus.utterances},
                                          {"min_seconds", cfg.corpus.min_seconds},
                                          {"max_seconds", cfg.corpus.max_seconds},
                                          {"speaker_depth", cfg.corpus.speaker_depth},
                                          {"seed", cfg.corpus.seed}});
  stage("corpus", corpus_hash, {"corpus/manifest.jsonl"}, [&] {
    fs::create_directories(res.out_dir + "/corpus");
    std::string root = cfg.corpus.root;
    if (root.empty()) {
      root = res.out_dir + "/corpus/wav";
      generate_synthetic_corpus(root, cfg.corpus.speakers, cfg.corpus.utterances,
                                cfg.corpus.min_seconds, cfg.corpus.max_seconds, cfg.corpus.seed);
    }
    CorpusManifest man = scan_corpus(root, Partition::kTrain, cfg.corpus.speaker_depth);
    save_manifest(man, res.corpus_manifest);
    if (log)
      std::fprintf(log, "  corpus: %zu utterances, %d speakers\n", man.records.size(),
                   man.num_speakers());
  });
  if (until == "corpus") return res;

  // mix: one dataset per split, each cached on its own hash
  std::vector<MixSpec> splits{cfg.scenario.train, cfg.scenario.dev};
  for (const auto& t : cfg.scenario.test) splits.push_back(t);
  std::map<std::string, std::string> mix_hashes;
  std::vector<SceneRecord> bank_cache;
  std::string bank_cache_regime;
  CorpusManifest man_cache;
  bool man_loaded = false;
  for (const auto& m : splits) {
    std::string h = content_hash(mix_stage_input(cfg, m, rir_hash, corpus_hash));
    mix_hashes[m.name] = h;
    std::string dir = res.out_dir + "/mix/" + m.name;
    res.mix_dirs[m.name] = dir;
    stage("mix_" + m.name, h, {"mix/" + m.name + "/samples.jsonl"}, [&] {
      if (bank_cache_regime != m.regime) {
        bank_cache = load_rir_bank(res.out_dir + "/rir/" + m.regime);
        bank_cache_regime = m.regime;
      }
      if (!man_loaded) {
        man_cache = load_manifest(res.corpus_manifest);
        man_loaded = true;
      }
      ScenarioConfig sc;
      sc.n_speakers = m.n_speakers;
      sc.regime = regime_from_name(m.regime);
      sc.intruded = m.intruded;
      sc.mixture_length = cfg.scenario.mixture_length;
      sc.rms_far_db = {cfg.scenario.far_db_lo, cfg.scenario.far_db_hi};
      build_dataset(bank_cache, res.out_dir + "/rir/" + m.regime, man_cache, sc, m.count,
                    split_seed(cfg.scenario.seed, m.name), dir, [&](int done, int total) {
                      if (log && (done % 50 == 0 || done == total))
                        std::fprintf(log, "  mix/%s: %d/%d samples\n", m.name.c_str(), done, total);
                    });
    });
  }
  if (until == "mix") return res;

  // train
  res.train_dir = res.out_dir + "/train";
  nlohmann::json model_j = model_config_json(cfg.model);
  model_j["stft_win"] = cfg.stft.win;
  model_j["stft_hop"] = cfg.stft.hop;
  std::string train_hash = content_hash({{"model", model_j},
                                         {"trainer", train_config_json(cfg.trainer)},
                                         {"mix_train", mix_hashes.at(cfg.scenario.train.name)},
                                         {"mix_dev", mix_hashes.at(cfg.scenario.dev.name)}});
  stage("train", train_hash, {"train/best.ckpt", "train/last.ckpt", "train/history.jsonl"}, [&] {
    auto train_entries = load_dataset(res.mix_dirs.at(cfg.scenario.train.name));
    auto dev_entries = load_dataset(res.mix_dirs.at(cfg.scenario.dev.name));
    ModelConfig mc = resolve_model(cfg, train_entries);
    train_into(cfg, mc, train_entries, dev_entries, res.train_dir, log);
  });
  if (until == "train") return res;

  // evaluate: best checkpoint against every test split, plus reports/plots
  res.eval_dir = res.out_dir + "/eval";
  nlohmann::json eval_in{{"train", train_hash}};
  for (const auto& t : cfg.scenario.test) eval_in["mix_" + t.name] = mix_hashes.at(t.name);
  std::string eval_hash = content_hash(eval_in);
  stage("evaluate", eval_hash, {"eval/summary.csv"}, [&] {
    Model<float> model = load_model(res.train_dir + "/best.ckpt");
    std::vector<SplitEval> evals;
    for (const auto& t : cfg.scenario.test) {
      auto entries = load_dataset(res.mix_dirs.at(t.name));
      EvalReport rep = evaluate(&model, entries, cfg.stft, res.eval_dir + "/" + t.name,
                                [&](int done, int total) {
                                  if (log && (done % 25 == 0 || done == total))
                                    std::fprintf(log, "  eval/%s: %d/%d\n", t.name.c_str(), done,
                                                 total);
                                });
      if (log)
        std::fprintf(log, "  eval/%s: SI-SDR %.3f dB, SI-SDRi %.3f dB\n", t.name.c_str(),
                     rep.mean_sisdr, rep.mean_sisdri);
      evals.push_back({t.name, std::move(rep)});
    }
    write_combined_eval(res.eval_dir, evals);
    write_run_plots(res.out_dir, res.train_dir, evals);
  });

  // provenance: config, seeds, stage hashes, and the checkpoint fingerprint
  nlohmann::json stages_j = nlohmann::json::object();
  for (const auto& s : res.stages) stages_j[s.stage] = s.hash;
  nlohmann::json prov{{"experiment_id", cfg.experiment_id},
                      {"config", experiment_config_json(cfg)},
                      {"stages", stages_j},
                      {"best_checkpoint", file_hash(res.train_dir + "/best.ckpt")}};
  std::ofstream pf(res.out_dir + "/provenance.json", std::ios::trunc);
  if (!pf) throw std::runtime_error("run_pipeline: cannot write provenance.json");
  pf << prov.dump(2) << "\n";
  return res;
}

// ---- ablation suite ----

struct AblationRow {
  std::string variant;
  std::string split;
  std::string group;
  int count = 0;
  double mix_sisdr = 0.0;
  double sisdr = 0.0;
  double sisdri = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::map<std::string, double> overall_sisdri;  // variant -> sample-weighted mean
  std::string csv_path;
  std::string txt_path;
};

// Trains and evaluates the full model and the three single-mechanism
// ablations on identical data and seeds, then writes a comparison table.
inline AblationReport ablation_suite(const ExperimentConfig& cfg, bool force = false,
                                     std::FILE* log = stdout) {
  using namespace pipeline_detail;
  if (cfg.model.kind != ModelKind::kNearSpeakerExtractor)
    throw std::invalid_argument("ablation_suite: needs the extractor model");
  PipelineResult data = run_pipeline(cfg, force, "mix", log);
  const std::string out = data.out_dir;

  struct Variant {
    const char* name;
    bool se, tatt, fatt;
  };
  const Variant grid[] = {
      {"full", false, false, false},
      {"no_se", true, false, false},
      {"no_t_att", false, true, false},
      {"no_f_att", false, false, true},
  };

  std::string mix_train_hash, mix_dev_hash;
  std::map<std::string, std::string> mix_test_hashes;
  for (const auto& s : data.stages) {
    if (s.stage == "mix_" + cfg.scenario.train.name) mix_train_hash = s.hash;
    if (s.stage == "mix_" + cfg.scenario.dev.name) mix_dev_hash = s.hash;
    for (const auto& t : cfg.scenario.test)
      if (s.stage == "mix_" + t.name) mix_test_hashes[t.name] = s.hash;
  }

  AblationReport rep;
  std::vector<StageRun> runs;
  for (const auto& v : grid) {
    ModelConfig mc = cfg.model;
    mc.ablate_se = v.se;
    mc.ablate_t_att = v.tatt;
    mc.ablate_f_att = v.fatt;
    nlohmann::json model_j = model_config_json(mc);
    model_j["stft_win"] = cfg.stft.win;
    model_j["stft_hop"] = cfg.stft.hop;
    std::string vdir = "ablate/" + std::string(v.name);
    std::string train_hash = content_hash({{"model", model_j},
                                           {"trainer", train_config_json(cfg.trainer)},
                                           {"mix_train", mix_train_hash},
                                           {"mix_dev", mix_dev_hash}});
    exec_stage(out, force, log, runs, "ablate_" + std::string(v.name) + "_train", train_hash,
               {vdir + "/train/best.ckpt"}, [&] {
                 auto train_entries = load_dataset(data.mix_dirs.at(cfg.scenario.train.name));
                 auto dev_entries = load_dataset(data.mix_dirs.at(cfg.scenario.dev.name));
                 ExperimentConfig vc = cfg;
                 vc.model = mc;
                 ModelConfig resolved = resolve_model(vc, train_entries);
                 train_into(vc, resolved, train_entries, dev_entries, out + "/" + vdir + "/train",
                            log);
               });

    nlohmann::json eval_in{{"train", train_hash}};
    for (const auto& t : cfg.scenario.test) eval_in["mix_" + t.name] = mix_test_hashes.at(t.name);
    std::string eval_hash = content_hash(eval_in);
    exec_stage(out, force, log, runs, "ablate_" + std::string(v.name) + "_eval", eval_hash,
               {vdir + "/eval/summary.csv"}, [&] {
                 Model<float> model = load_model(out + "/" + vdir + "/train/best.ckpt");
                 std::vector<SplitEval> evals;
                 for (const auto& t : cfg.scenario.test) {
                   auto entries = load_dataset(data.mix_dirs.at(t.name));
                   evals.push_back({t.name, evaluate(&model, entries, cfg.stft,
                                                     out + "/" + vdir + "/eval/" + t.name)});
                 }
                 write_combined_eval(out + "/" + vdir + "/eval", evals);
               });

    // collect rows from the per-variant summaries (works for cached stages too)
    double wsum = 0.0;
    int nsum = 0;
    for (const auto& t : cfg.scenario.test) {
      std::ifstream f(out + "/" + vdir + "/eval/" + t.name + "/per_sample.jsonl");
      std::string line;
      std::map<std::string, std::array<double, 3>> acc;  // group -> [mix, est, count]
      while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.contains("error")) continue;
        std::string g = group_key(j.at("n_speakers").get<int>(), j.at("intruded").get<bool>(),
                                  j.at("regime").get<std::string>());
        acc[g][0] += j.at("mixture_si_sdr").get<double>();
        acc[g][1] += j.at("si_sdr").get<double>();
        acc[g][2] += 1.0;
      }
      for (const auto& [g, a] : acc) {
        AblationRow row;
        row.variant = v.name;
        row.split = t.name;
        row.group = g;
        row.count = static_cast<int>(a[2]);
        row.mix_sisdr = a[0] / a[2];
        row.sisdr = a[1] / a[2];
        row.sisdri = row.sisdr - row.mix_sisdr;
        rep.rows.push_back(row);
        wsum += (row.sisdr - row.mix_sisdr) * a[2];
        nsum += row.count;
      }
    }
    rep.overall_sisdri[v.name] = nsum > 0 ? wsum / nsum : 0.0;
  }

  std::filesystem::create_directories(out + "/ablate");
  rep.csv_path = out + "/ablate/comparison.csv";
  rep.txt_path = out + "/ablate/comparison.txt";
  std::ofstream csv(rep.csv_path, std::ios::trunc);
  csv << "variant,split,group,count,mixture_si_sdr,si_sdr,si_sdri\n";
  char buf[256];
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%d,%.4f,%.4f,%.4f\n", r.variant.c_str(),
                  r.split.c_str(), r.group.c_str(), r.count, r.mix_sisdr, r.sisdr, r.sisdri);
    csv << buf;
  }
  std::ofstream txt(rep.txt_path, std::ios::trunc);
  txt << "ablation comparison (mean over test samples)\n\n";
  std::snprintf(buf, sizeof(buf), "%-10s %12s %12s\n", "variant", "SI-SDR", "SI-SDRi");
  txt << buf;
  for (const auto& v : grid) {
    double ssum = 0.0, isum = 0.0;
    int n = 0;
    for (const auto& r : rep.rows)
      if (r.variant == v.name) {
        ssum += r.sisdr * r.count;
        isum += r.sisdri * r.count;
        n += r.count;
      }
    std::snprintf(buf, sizeof(buf), "%-10s %12.3f %12.3f\n", v.name, n ? ssum / n : 0.0,
                  n ? isum / n : 0.0);
    txt << buf;
  }

  std::vector<std::pair<std::string, double>> bars;
  for (const auto& v : grid) bars.emplace_back(v.name, rep.overall_sisdri.at(v.name));
  std::filesystem::create_directories(out + "/plots");
  write_bar_chart(out + "/plots/ablation_sisdri", "ablation: SI-SDR improvement (dB)", bars);
  return rep;
}

}  // namespace nsx

#endif  // NSX_PIPELINE_PIPELINE_HPP_
