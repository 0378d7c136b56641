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

#ifndef NSX_PIPELINE_CLI_HPP_
#define NSX_PIPELINE_CLI_HPP_

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nsx/acoustics/bank.hpp"
#include "nsx/corpus/corpus.hpp"
#include "nsx/corpus/synth.hpp"
#include "nsx/mixer/mixer.hpp"
#include "nsx/pipeline/pipeline.hpp"

namespace nsx {

inline int cli_main(int argc, char** argv) {
  CLI::App app{"near-speaker extraction pipeline"};
  app.require_subcommand(1);

  // ---- rir generate ----
  auto* rir = app.add_subcommand("rir", "simulate room impulse responses");
  auto* rir_gen = rir->add_subcommand("generate", "sample scenes and render a RIR bank");
  int rir_count = 50;
  std::string rir_regime = "normal", rir_out = "rir_bank";
  uint64_t rir_seed = 1;
  double rir_disp = kImagePerturbMeters;
  rir_gen->add_option("--count", rir_count, "number of scenes");
  rir_gen->add_option("--regime", rir_regime, "normal|faint");
  rir_gen->add_option("--out", rir_out, "output directory")->required();
  rir_gen->add_option("--seed", rir_seed, "rng seed");
  rir_gen->add_option("--displacement", rir_disp, "image jitter in meters");
  rir_gen->callback([&] {
    (void)rir_disp;
    build_rir_bank(rir_out, rir_count, rir_seed, regime_from_name(rir_regime),
                   [](int done, int total) {
                     if (done % 10 == 0 || done == total)
                       std::printf("rir: %d/%d scenes\n", done, total);
                   });
  });

  // ---- corpus scan / synth ----
  auto* corpus = app.add_subcommand("corpus", "speech corpus ingestion");
  auto* scan = corpus->add_subcommand("scan", "index a wav directory tree into a manifest");
  std::string scan_root, scan_partition = "train", scan_out = "manifest.jsonl";
  int scan_depth = 0;
  scan->add_option("--root", scan_root, "corpus root directory")->required();
  scan->add_option("--partition", scan_partition, "train|dev|test");
  scan->add_option("--out", scan_out, "manifest path")->required();
  scan->add_option("--speaker-depth", scan_depth, "path depth of the speaker directory");
  scan->callback([&] {
    ScanResult res = scan_corpus_full(scan_root, partition_from_name(scan_partition), scan_depth);
    save_manifest(res.manifest, scan_out);
    if (!res.skipped.empty()) {
      std::ofstream rep(scan_out + ".skipped.txt", std::ios::trunc);
      for (const auto& s : res.skipped) rep << s << "\n";
    }
    std::printf("corpus: %zu utterances, %d speakers, %zu skipped\n", res.manifest.records.size(),
                res.manifest.num_speakers(), res.skipped.size());
  });

  auto* synth = corpus->add_subcommand("synth", "generate a synthetic surrogate speech corpus");
  std::string synth_out;
  int synth_speakers = 20, synth_utts = 10;
  double synth_min = 4.0, synth_max = 10.0;
  uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--speakers", synth_speakers, "number of speakers");
  synth->add_option("--utts", synth_utts, "utterances per speaker");
  synth->add_option("--min-seconds", synth_min, "min utterance length");
  synth->add_option("--max-seconds", synth_max, "max utterance length");
  synth->add_option("--seed", synth_seed, "rng seed");
  synth->callback([&] {
    generate_synthetic_corpus(synth_out, synth_speakers, synth_utts, synth_min, synth_max, synth_seed);
    std::printf("corpus: wrote %d speakers x %d utterances under %s\n", synth_speakers, synth_utts,
                synth_out.c_str());
  });

  // ---- mix synth ----
  auto* mix = app.add_subcommand("mix", "mixture dataset synthesis");
  auto* mix_synth = mix->add_subcommand("synth", "build an n-speaker mixture dataset");
  std::string mix_scenes, mix_manifest, mix_out, mix_regime = "normal";
  int mix_n = 2, mix_count = 100;
  bool mix_intruded = false;
  uint64_t mix_seed = 1;
  double far_lo = -30.0, far_hi = -20.0;
  mix_synth->add_option("--scenes", mix_scenes, "RIR bank directory")->required();
  mix_synth->add_option("--manifest", mix_manifest, "corpus manifest path")->required();
  mix_synth->add_option("--n", mix_n, "speakers per mixture");
  mix_synth->add_option("--count", mix_count, "number of mixtures");
  mix_synth->add_flag("--intruded", mix_intruded, "add a late near intruder");
  mix_synth->add_option("--regime", mix_regime, "normal|faint");
  mix_synth->add_option("--out", mix_out, "output directory")->required();
  mix_synth->add_option("--seed", mix_seed, "rng seed");
  mix_synth->add_option("--far-db-lo", far_lo, "far-speaker RMS low bound (dB)");
  mix_synth->add_option("--far-db-hi", far_hi, "far-speaker RMS high bound (dB)");
  mix_synth->callback([&] {
    auto scenes = load_rir_bank(mix_scenes);
    auto man = load_manifest(mix_manifest);
    ScenarioConfig cfg;
    cfg.n_speakers = mix_n;
    cfg.regime = regime_from_name(mix_regime);
    cfg.intruded = mix_intruded;
    cfg.rms_far_db = {far_lo, far_hi};
    build_dataset(scenes, mix_scenes, man, cfg, mix_count, mix_seed, mix_out,
                  [](int done, int total) {
                    if (done % 50 == 0 || done == total)
                      std::printf("mix: %d/%d samples\n", done, total);
                  });
  });

  // ---- config init ----
  auto* config = app.add_subcommand("config", "experiment configuration");
  auto* cfg_init = config->add_subcommand("init", "write a default experiment config");
  std::string cfg_out = "experiment.json";
  cfg_init->add_option("--out", cfg_out, "config path")->required();
  cfg_init->callback([&] {
    ExperimentConfig c;
    save_experiment_config(c, cfg_out);
    std::printf("config: wrote %s\n", cfg_out.c_str());
  });

  // ---- train ----
  auto* train = app.add_subcommand("train", "run the pipeline up to training");
  std::string train_config;
  uint64_t train_seed = 0;
  bool train_force = false;
  train->add_option("--config", train_config, "experiment config path")->required();
  train->add_option("--seed", train_seed, "override the trainer seed");
  train->add_flag("--force", train_force, "ignore stage caches");
  train->callback([&] {
    ExperimentConfig c = load_experiment_config(train_config);
    if (train_seed != 0) c.trainer.seed = train_seed;
    PipelineResult res = run_pipeline(c, train_force, "train");
    std::printf("train: artifacts under %s\n", res.train_dir.c_str());
  });

  // ---- evaluate ----
  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on a mixture dataset");
  std::string eval_ckpt, eval_data, eval_out = "eval";
  int eval_win = 0, eval_hop = 0;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint path (omit to score the mixture itself)");
  eval->add_option("--data", eval_data, "dataset directory with samples.jsonl")->required();
  eval->add_option("--out", eval_out, "report directory")->required();
  eval->add_option("--stft-win", eval_win, "window length (default: from model bins)");
  eval->add_option("--stft-hop", eval_hop, "hop length (default: win/2)");
  eval->callback([&] {
    auto entries = load_dataset(eval_data);
    std::optional<Model<float>> model;
    Model<float>* mp = nullptr;
    StftConfig scfg;
    if (!eval_ckpt.empty()) {
      model.emplace(load_model(eval_ckpt));
      mp = &*model;
      scfg.win = eval_win > 0 ? eval_win : (model->config().F - 1) * 2;
    } else {
      scfg.win = eval_win > 0 ? eval_win : 256;
    }
    scfg.hop = eval_hop > 0 ? eval_hop : scfg.win / 2;
    EvalReport rep = evaluate(mp, entries, scfg, eval_out, [](int done, int total) {
      if (done % 25 == 0 || done == total) std::printf("evaluate: %d/%d\n", done, total);
    });
    std::printf("evaluate: SI-SDR %.3f dB, SI-SDRi %.3f dB over %d samples (%d failed)\n",
                rep.mean_sisdr, rep.mean_sisdri, rep.evaluated, rep.failures);
  });

  // ---- ablate ----
  auto* ablate = app.add_subcommand("ablate", "train and compare mechanism ablations");
  std::string ablate_config;
  bool ablate_force = false;
  ablate->add_option("--config", ablate_config, "experiment config path")->required();
  ablate->add_flag("--force", ablate_force, "ignore stage caches");
  ablate->callback([&] {
    ExperimentConfig c = load_experiment_config(ablate_config);
    AblationReport rep = ablation_suite(c, ablate_force);
    std::printf("ablate: wrote %s\n", rep.txt_path.c_str());
    for (const auto& [name, sisdri] : rep.overall_sisdri)
      std::printf("  %-10s SI-SDRi %8.3f dB\n", name.c_str(), sisdri);
  });

  // ---- run ----
  auto* run = app.add_subcommand("run", "run the full pipeline");
  std::string run_config, run_until;
  bool run_force = false;
  run->add_option("--config", run_config, "experiment config path")->required();
  run->add_option("--until", run_until, "stop after this stage (rir|corpus|mix|train|evaluate)");
  run->add_flag("--force", run_force, "ignore stage caches");
  run->callback([&] {
    ExperimentConfig c = load_experiment_config(run_config);
    PipelineResult res = run_pipeline(c, run_force, run_until);
    int cached = 0;
    for (const auto& s : res.stages) cached += s.cached ? 1 : 0;
    std::printf("run: %zu stages (%d cached) under %s\n", res.stages.size(), cached,
                res.out_dir.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace nsx

#endif  // NSX_PIPELINE_CLI_HPP_
