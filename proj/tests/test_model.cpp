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
#include <cstdio>
#include <vector>

#include "nsx/ad/gradcheck.hpp"
#include "nsx/model/baselines.hpp"
#include "nsx/model/config.hpp"
#include "nsx/model/extractor.hpp"
#include "nsx/model/model.hpp"

using namespace nsx;

namespace {

template <typename S>
Tensor<S> random_spec(int64_t F, int64_t T, uint64_t seed, S scale = S(1)) {
  Rng rng(seed);
  Tensor<S> t({2, F, T});
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<S>(rng.uniform(-static_cast<double>(scale), static_cast<double>(scale)));
  return t;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.C = 2;
  cfg.D = 4;
  cfg.E = 2;
  cfg.L = 2;
  cfg.I = 4;
  cfg.J = 1;
  cfg.H = 4;
  cfg.N = 3;
  cfg.F = 9;
  cfg.init_seed = 7;
  return cfg;
}

template <typename S>
void zero_param(ad::ParamStore<S>& ps, const std::string& name) {
  int id = ps.find(name);
  REQUIRE(id >= 0);
  ps.at(id).value.fill(S(0));
}

}  // namespace

TEST_CASE("model config json round trip", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.kind = ModelKind::kUnetBaseline;
  cfg.ablate_t_att = true;
  cfg.init_seed = 12345;
  ModelConfig back = model_config_from_json(model_config_json(cfg));
  CHECK(model_config_json(back) == model_config_json(cfg));
  CHECK(back.kind == ModelKind::kUnetBaseline);
  CHECK(back.ablate_t_att);
  CHECK(back.N == cfg.N);
}

TEST_CASE("config rejects invalid head split", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.D = 5;  // not divisible by L=2
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("input encoder maps to embedding grid at full scale", "[model]") {
  ModelConfig cfg;  // defaults: D=24, F=129
  cfg.C = 1;        // blocks are irrelevant here, keep construction light
  NearSpeakerExtractor<float> net(cfg);
  ad::Graph<float> g;
  int x = g.leaf(random_spec<float>(129, 626, 11));
  int h = net.encode(g, x);
  const auto& vh = g.val(h);
  REQUIRE(vh.rank() == 3);
  CHECK(vh.dim(0) == 24);
  CHECK(vh.dim(1) == 626);
  CHECK(vh.dim(2) == 129);
}

TEST_CASE("encoder normalization yields zero mean unit variance", "[model]") {
  // gamma starts at 1 and beta at 0, so the fresh encoder output exposes the
  // normalized statistics directly.
  ModelConfig cfg = tiny_config();
  cfg.C = 1;
  NearSpeakerExtractor<float> net(cfg);
  ad::Graph<float> g;
  int x = g.leaf(random_spec<float>(cfg.F, 17, 3));
  int h = net.encode(g, x);
  const auto& vh = g.val(h);
  double mean = 0, var = 0;
  for (int64_t i = 0; i < vh.size(); ++i) mean += vh[i];
  mean /= static_cast<double>(vh.size());
  for (int64_t i = 0; i < vh.size(); ++i) var += (vh[i] - mean) * (vh[i] - mean);
  var /= static_cast<double>(vh.size());
  CHECK(std::abs(mean) < 1e-4);
  CHECK(std::abs(var - 1.0) < 1e-3);
}

TEST_CASE("encoder output stays finite for silent input", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.C = 1;
  NearSpeakerExtractor<float> net(cfg);
  ad::Graph<float> g;
  int x = g.leaf(Tensor<float>({2, static_cast<int64_t>(cfg.F), 5}));
  int h = net.encode(g, x);
  const auto& vh = g.val(h);
  for (int64_t i = 0; i < vh.size(); ++i) CHECK(std::isfinite(vh[i]));
}

TEST_CASE("extractor forward preserves shape and emits per-block logits", "[model]") {
  ModelConfig cfg = tiny_config();
  NearSpeakerExtractor<float> net(cfg);
  ad::Graph<float> g;
  int x = g.leaf(random_spec<float>(cfg.F, 7, 5));
  auto out = net.forward(g, x);
  const auto& vy = g.val(out.spec);
  REQUIRE(vy.rank() == 3);
  CHECK(vy.dim(0) == 2);
  CHECK(vy.dim(1) == cfg.F);
  CHECK(vy.dim(2) == 7);
  REQUIRE(out.logits.size() == 2);
  for (int lg : out.logits) {
    const auto& vl = g.val(lg);
    REQUIRE(vl.size() == cfg.N);
    for (int64_t i = 0; i < vl.size(); ++i) CHECK(std::isfinite(vl[i]));
  }
  for (int64_t i = 0; i < vy.size(); ++i) CHECK(std::isfinite(vy[i]));
}

TEST_CASE("six chained blocks collect six logit vectors", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.C = 6;
  cfg.N = 2;
  NearSpeakerExtractor<float> net(cfg);
  ad::Graph<float> g;
  int x = g.leaf(random_spec<float>(cfg.F, 3, 9));
  auto out = net.forward(g, x);
  CHECK(out.logits.size() == 6);
}

TEST_CASE("fuse path handles 129 bins with kernel 4 stride 1", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.C = 1;
  cfg.D = 2;
  cfg.E = 1;
  cfg.L = 1;
  cfg.H = 2;
  cfg.N = 0;
  cfg.F = 129;
  CHECK(cfg.padded_bins() == 132);
  NearSpeakerExtractor<float> net(cfg);
  ad::Graph<float> g;
  int x = g.leaf(random_spec<float>(129, 4, 21));
  int h = net.encode(g, x);
  int y = net.fuse_path(g, 0, h);
  CHECK(g.val(y).shape() == g.val(h).shape());
}

TEST_CASE("blocks collapse to identity when output weights vanish", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.C = 1;
  NearSpeakerExtractor<float> net(cfg);
  auto& ps = net.params();
  zero_param(ps, "block0.fuse.deconv.weight");
  zero_param(ps, "block0.fuse.deconv.bias");
  zero_param(ps, "block0.tatt.out.weight");
  zero_param(ps, "block0.tatt.out.bias");
  zero_param(ps, "block0.fatt.out.weight");
  zero_param(ps, "block0.fatt.out.bias");

  ad::Graph<float> g;
  int x = g.leaf(random_spec<float>(cfg.F, 6, 31));
  int h = net.encode(g, x);
  int f = net.fuse_path(g, 0, h);
  int t = net.time_attention(g, 0, h);
  int q = net.freq_attention(g, 0, h);
  const auto& vh = g.val(h);
  for (int64_t i = 0; i < vh.size(); ++i) {
    REQUIRE(g.val(f)[i] == vh[i]);
    REQUIRE(g.val(t)[i] == vh[i]);
    REQUIRE(g.val(q)[i] == vh[i]);
  }
}

TEST_CASE("speaker embedding equals one frame transform for constant input", "[model]") {
  // with the residual convolutions silenced the path is reduce -> pool, and
  // pooling a time-constant sequence must return that constant per bin
  ModelConfig cfg = tiny_config();
  cfg.C = 1;
  NearSpeakerExtractor<float> net(cfg);
  auto& ps = net.params();
  for (int r = 0; r < 3; ++r) {
    zero_param(ps, "block0.se.res" + std::to_string(r) + ".conv.weight");
    zero_param(ps, "block0.se.res" + std::to_string(r) + ".conv.bias");
  }

  int64_t F = cfg.F, T = 6, D = cfg.D;
  Tensor<float> frame({static_cast<int64_t>(D), 1, F});
  Rng rng(41);
  for (int64_t i = 0; i < frame.size(); ++i) frame[i] = static_cast<float>(rng.uniform(-1, 1));
  Tensor<float> h(std::vector<int64_t>{D, T, F});
  for (int64_t d = 0; d < D; ++d)
    for (int64_t t = 0; t < T; ++t)
      for (int64_t f = 0; f < F; ++f) h[(d * T + t) * F + f] = frame[d * F + f];

  ad::Graph<float> g;
  int hid = g.leaf(h.clone());
  auto [emb, lg] = net.speaker_path(g, 0, hid);
  REQUIRE(g.val(emb).size() == F);
  REQUIRE(g.val(lg).size() == cfg.N);

  const auto& w = ps.at(ps.find("block0.se.reduce.weight")).value;  // [1, D, 1, 1]
  const auto& b = ps.at(ps.find("block0.se.reduce.bias")).value;
  for (int64_t f = 0; f < F; ++f) {
    float want = b[0];
    for (int64_t d = 0; d < D; ++d) want += w[d] * frame[d * F + f];
    CHECK(g.val(emb)[f] == Catch::Approx(want).margin(1e-5));
  }
}

TEST_CASE("ablations drop their parameters and logits", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.ablate_se = true;
  NearSpeakerExtractor<float> net(cfg);
  CHECK(net.params().find("block0.se.head.weight") == -1);
  CHECK(net.params().find("block0.fuse.restore.weight") == -1);
  ad::Graph<float> g;
  int x = g.leaf(random_spec<float>(cfg.F, 5, 2));
  auto out = net.forward(g, x);
  CHECK(out.logits.empty());
  CHECK(g.val(out.spec).dim(2) == 5);

  ModelConfig cfg2 = tiny_config();
  cfg2.ablate_t_att = true;
  cfg2.ablate_f_att = true;
  NearSpeakerExtractor<float> net2(cfg2);
  CHECK(net2.params().find("block0.tatt.out.weight") == -1);
  CHECK(net2.params().find("block0.fatt.out.weight") == -1);
  ad::Graph<float> g2;
  int x2 = g2.leaf(random_spec<float>(cfg2.F, 5, 2));
  auto out2 = net2.forward(g2, x2);
  CHECK(out2.logits.size() == 2);
  CHECK(g2.val(out2.spec).dim(1) == cfg2.F);
}

TEST_CASE("forward is nonlinear in its input", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.C = 1;
  NearSpeakerExtractor<float> net(cfg);
  Tensor<float> x1 = random_spec<float>(cfg.F, 5, 77);
  Tensor<float> x2 = x1.clone();
  for (int64_t i = 0; i < x2.size(); ++i) x2[i] *= 2.0f;
  ad::Graph<float> g;
  auto y1 = net.forward(g, g.leaf(std::move(x1)));
  auto y2 = net.forward(g, g.leaf(std::move(x2)));
  double dev = 0;
  for (int64_t i = 0; i < g.val(y1.spec).size(); ++i)
    dev = std::max(dev, std::abs(2.0 * g.val(y1.spec)[i] - g.val(y2.spec)[i]));
  CHECK(dev > 1e-3);
}

TEST_CASE("forward is deterministic for a fixed seed", "[model]") {
  ModelConfig cfg = tiny_config();
  NearSpeakerExtractor<float> a(cfg), b(cfg);
  REQUIRE(a.params().size() == b.params().size());
  REQUIRE(a.params().count_scalars() == b.params().count_scalars());
  for (int i = 0; i < a.params().size(); ++i) {
    const auto& pa = a.params().at(i).value;
    const auto& pb = b.params().at(i).value;
    for (int64_t k = 0; k < pa.size(); ++k) REQUIRE(pa[k] == pb[k]);
  }
  Tensor<float> x = random_spec<float>(cfg.F, 6, 13);
  ad::Graph<float> g1, g2;
  auto o1 = a.forward(g1, g1.leaf(x.clone()));
  auto o2 = b.forward(g2, g2.leaf(x.clone()));
  for (int64_t i = 0; i < g1.val(o1.spec).size(); ++i)
    REQUIRE(g1.val(o1.spec)[i] == g2.val(o2.spec)[i]);
}

TEST_CASE("extractor gradients match finite differences", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.C = 1;
  cfg.H = 3;
  cfg.N = 2;
  NearSpeakerExtractor<double> net(cfg);
  auto& ps = net.params();
  Tensor<double> x = random_spec<double>(cfg.F, 4, 19, 0.5);
  Tensor<double> target = random_spec<double>(cfg.F, 4, 23, 0.5);

  auto build = [&](ad::Graph<double>& g, ad::ParamStore<double>&) {
    int xin = g.leaf(x.clone());
    auto out = net.forward(g, xin);
    int diff = ad::add(g, out.spec, ad::scale(g, g.leaf(target.clone()), -1.0));
    int loss = ad::mean_all(g, ad::hadamard(g, diff, diff));
    for (int lg : out.logits)
      loss = ad::add(g, loss, ad::scale(g, ad::cross_entropy(g, lg, 1), 0.1));
    return loss;
  };

  std::vector<std::pair<int, int64_t>> coords;
  const char* names[] = {"enc.conv.weight",          "enc.norm.gamma",
                         "block0.se.reduce.weight",  "block0.se.head.weight",
                         "block0.fuse.restore.weight", "block0.fuse.rnn.fwd.W",
                         "block0.fuse.rnn.bwd.U",    "block0.fuse.deconv.weight",
                         "block0.tatt.head0.q.weight", "block0.tatt.out.weight",
                         "block0.fatt.head1.v.weight", "block0.fatt.out.bias",
                         "dec.conv.weight",          "block0.se.res1.act.slope"};
  Rng pick(5);
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

TEST_CASE("unet keeps shape and uses the published widths", "[model]") {
  ModelConfig cfg;
  cfg.kind = ModelKind::kUnetBaseline;
  cfg.init_seed = 4;
  UnetModel<float> net(cfg);
  const int64_t widths[5] = {16, 32, 64, 128, 256};
  for (int i = 0; i < 5; ++i) {
    int id = net.params().find("enc" + std::to_string(i) + ".weight");
    REQUIRE(id >= 0);
    CHECK(net.params().at(id).value.dim(0) == widths[i]);
  }
  ad::Graph<float> g;
  int x = g.leaf(random_spec<float>(129, 20, 6));
  int y = net.forward(g, x);
  const auto& vy = g.val(y);
  CHECK(vy.dim(0) == 2);
  CHECK(vy.dim(1) == 129);
  CHECK(vy.dim(2) == 20);
  for (int64_t i = 0; i < vy.size(); ++i) REQUIRE(std::isfinite(vy[i]));

  UnetModel<float> again(cfg);
  CHECK(again.params().count_scalars() == net.params().count_scalars());
}

TEST_CASE("blstm baseline maps spectrogram to spectrogram", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.kind = ModelKind::kBlstmBaseline;
  cfg.lstm_layers = 2;
  cfg.lstm_width = 8;
  BlstmModel<float> net(cfg);
  ad::Graph<float> g;
  int x = g.leaf(random_spec<float>(cfg.F, 5, 8));
  int y = net.forward(g, x);
  CHECK(g.val(y).dim(0) == 2);
  CHECK(g.val(y).dim(1) == cfg.F);
  CHECK(g.val(y).dim(2) == 5);

  int zero = g.leaf(Tensor<float>({2, static_cast<int64_t>(cfg.F), 4}));
  int yz = net.forward(g, zero);
  for (int64_t i = 0; i < g.val(yz).size(); ++i) REQUIRE(std::isfinite(g.val(yz)[i]));
}

TEST_CASE("model wrapper dispatches on kind", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.lstm_width = 8;
  for (ModelKind kind :
       {ModelKind::kNearSpeakerExtractor, ModelKind::kBlstmBaseline, ModelKind::kUnetBaseline}) {
    cfg.kind = kind;
    Model<float> m(cfg);
    ad::Graph<float> g;
    int x = g.leaf(random_spec<float>(cfg.F, 5, 2));
    auto out = m.forward(g, x);
    CHECK(g.val(out.spec).dim(1) == cfg.F);
    bool expect_logits = kind == ModelKind::kNearSpeakerExtractor;
    CHECK(out.logits.empty() == !expect_logits);
  }
}

TEST_CASE("checkpoint round trip preserves weights and optimizer state", "[model]") {
  ModelConfig cfg = tiny_config();
  cfg.C = 1;
  Model<float> m(cfg);
  auto& ps = m.params();

  AdamState opt;
  opt.step = 42;
  Rng rng(9);
  for (int i = 0; i < ps.size(); ++i) {
    std::vector<float> mi(static_cast<size_t>(ps.at(i).value.size()));
    std::vector<float> vi(mi.size());
    for (size_t k = 0; k < mi.size(); ++k) {
      mi[k] = static_cast<float>(rng.uniform(-1, 1));
      vi[k] = static_cast<float>(rng.uniform(0, 1));
    }
    opt.m.push_back(std::move(mi));
    opt.v.push_back(std::move(vi));
  }

  std::string path = "ckpt_roundtrip.bin";
  save_checkpoint(path, cfg, ps, &opt, nlohmann::json{{"epoch", 3}, {"dev_sisdr", 1.5}});
  LoadedCheckpoint ck = load_checkpoint(path);
  CHECK(model_config_json(ck.config) == model_config_json(cfg));
  CHECK(ck.extra["epoch"] == 3);
  REQUIRE(ck.has_opt);
  CHECK(ck.opt.step == 42);
  REQUIRE(ck.params.size() == static_cast<size_t>(ps.size()));
  for (int i = 0; i < ps.size(); ++i) {
    for (size_t k = 0; k < opt.m[static_cast<size_t>(i)].size(); ++k) {
      REQUIRE(ck.opt.m[static_cast<size_t>(i)][k] == opt.m[static_cast<size_t>(i)][k]);
      REQUIRE(ck.opt.v[static_cast<size_t>(i)][k] == opt.v[static_cast<size_t>(i)][k]);
    }
  }

  Model<float> restored = load_model(path);
  Tensor<float> x = random_spec<float>(cfg.F, 5, 55);
  ad::Graph<float> g1, g2;
  auto o1 = m.forward(g1, g1.leaf(x.clone()));
  auto o2 = restored.forward(g2, g2.leaf(x.clone()));
  for (int64_t i = 0; i < g1.val(o1.spec).size(); ++i)
    REQUIRE(g1.val(o1.spec)[i] == g2.val(o2.spec)[i]);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects foreign files", "[model]") {
  std::string path = "ckpt_bogus.bin";
  {
    std::ofstream os(path, std::ios::binary);
    os << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint("no_such_file.bin"), std::runtime_error);
  std::remove(path.c_str());
}
