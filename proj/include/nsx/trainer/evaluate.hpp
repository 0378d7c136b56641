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

#ifndef NSX_TRAINER_EVALUATE_HPP_
#define NSX_TRAINER_EVALUATE_HPP_

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsx/trainer/trainer.hpp"

namespace nsx {

struct SampleEval {
  std::string sample_id;
  int n_speakers = 0;
  bool intruded = false;
  std::string regime;
  double sisdr = 0.0;      // estimate vs near target
  double mix_sisdr = 0.0;  // mixture vs near target
  double sisdri = 0.0;
  bool ok = true;
  std::string error;
};

struct GroupStats {
  int n_speakers = 0;
  bool intruded = false;
  std::string regime;
  int count = 0;
  double mean_sisdr = 0.0;
  double mean_mix_sisdr = 0.0;
  double mean_sisdri = 0.0;
};

struct EvalReport {
  std::vector<SampleEval> samples;
  std::vector<GroupStats> groups;
  double mean_sisdr = 0.0;
  double mean_sisdri = 0.0;
  int evaluated = 0;
  int failures = 0;
};

inline std::string group_key(int n_speakers, bool intruded, const std::string& regime) {
  return std::to_string(n_speakers) + "spkr" + (intruded ? "+intruder" : "") + "/" + regime;
}

inline std::string group_key(const GroupStats& g) {
  return group_key(g.n_speakers, g.intruded, g.regime);
}

inline void write_eval_report(const EvalReport& rep, const std::string& out_dir);

// Runs the model over a manifest and aggregates SI-SDR / SI-SDRi per
// scenario cell (speaker count x intrusion x reverberation regime). A null
// model scores the mixture itself, the zero-improvement reference. Per
// sample failures are recorded, not fatal. Pure, so reruns reproduce the
// report byte for byte.
inline EvalReport evaluate(Model<float>* model, const std::vector<DatasetEntry>& entries,
                           const StftConfig& scfg = {}, const std::string& out_dir = "",
                           const std::function<void(int, int)>& progress = nullptr) {
  EvalReport rep;
  for (size_t i = 0; i < entries.size(); ++i) {
    const DatasetEntry& e = entries[i];
    SampleEval se;
    se.sample_id = e.sample_id;
    se.n_speakers = e.n_speakers;
    se.intruded = e.intruded;
    se.regime = e.regime;
    try {
      SampleData s = load_sample(e, scfg);
      std::vector<float> est;
      if (model != nullptr) {
        ad::Graph<float> g;
        auto out = model->forward(g, g.leaf(std::move(s.spec)));
        ComplexSpectrogram pred{g.val(out.spec).clone(), scfg};
        est = istft(pred, static_cast<int64_t>(s.target.size()));
      } else {
        est = s.mixture;
      }
      se.sisdr = si_sdr(est, s.target);
      se.mix_sisdr = si_sdr(s.mixture, s.target);
      se.sisdri = se.sisdr - se.mix_sisdr;
    } catch (const std::exception& ex) {
      se.ok = false;
      se.error = ex.what();
    }
    rep.samples.push_back(std::move(se));
    if (progress) progress(static_cast<int>(i) + 1, static_cast<int>(entries.size()));
  }

  std::map<std::tuple<int, bool, std::string>, GroupStats> groups;
  for (const auto& se : rep.samples) {
    if (!se.ok) {
      ++rep.failures;
      continue;
    }
    auto& g = groups[{se.n_speakers, se.intruded, se.regime}];
    g.n_speakers = se.n_speakers;
    g.intruded = se.intruded;
    g.regime = se.regime;
    g.count += 1;
    g.mean_sisdr += se.sisdr;
    g.mean_mix_sisdr += se.mix_sisdr;
    g.mean_sisdri += se.sisdri;
    rep.mean_sisdr += se.sisdr;
    rep.mean_sisdri += se.sisdri;
    ++rep.evaluated;
  }
  for (auto& [key, g] : groups) {
    (void)key;
    g.mean_sisdr /= g.count;
    g.mean_mix_sisdr /= g.count;
    g.mean_sisdri /= g.count;
    rep.groups.push_back(g);
  }
  if (rep.evaluated > 0) {
    rep.mean_sisdr /= rep.evaluated;
    rep.mean_sisdri /= rep.evaluated;
  }

  if (!out_dir.empty()) write_eval_report(rep, out_dir);
  return rep;
}

inline void write_eval_report(const EvalReport& rep, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::ofstream js(fs::path(out_dir) / "per_sample.jsonl", std::ios::trunc);
  for (const auto& se : rep.samples) {
    nlohmann::json j{{"sample_id", se.sample_id}, {"n_speakers", se.n_speakers},
                     {"intruded", se.intruded},   {"regime", se.regime}};
    if (se.ok) {
      j["si_sdr"] = se.sisdr;
      j["mixture_si_sdr"] = se.mix_sisdr;
      j["si_sdri"] = se.sisdri;
    } else {
      j["error"] = se.error;
    }
    js << j.dump() << "\n";
  }

  std::ofstream csv(fs::path(out_dir) / "summary.csv", std::ios::trunc);
  csv << "group,n_speakers,intruded,regime,count,mixture_si_sdr,si_sdr,si_sdri\n";
  char line[256];
  for (const auto& g : rep.groups) {
    std::snprintf(line, sizeof(line), "%s,%d,%d,%s,%d,%.4f,%.4f,%.4f\n", group_key(g).c_str(),
                  g.n_speakers, g.intruded ? 1 : 0, g.regime.c_str(), g.count, g.mean_mix_sisdr,
                  g.mean_sisdr, g.mean_sisdri);
    csv << line;
  }

  std::ofstream txt(fs::path(out_dir) / "summary.txt", std::ios::trunc);
  txt << "scenario                 count   mix SI-SDR     SI-SDR    SI-SDRi\n";
  for (const auto& g : rep.groups) {
    std::snprintf(line, sizeof(line), "%-24s %5d %12.2f %10.2f %10.2f\n", group_key(g).c_str(),
                  g.count, g.mean_mix_sisdr, g.mean_sisdr, g.mean_sisdri);
    txt << line;
  }
  std::snprintf(line, sizeof(line), "%-24s %5d %12s %10.2f %10.2f\n", "overall", rep.evaluated, "",
                rep.mean_sisdr, rep.mean_sisdri);
  txt << line;
  if (rep.failures > 0) txt << rep.failures << " samples failed; see per_sample.jsonl\n";
}

}  // namespace nsx

#endif  // NSX_TRAINER_EVALUATE_HPP_
