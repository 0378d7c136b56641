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

#ifndef NSX_MODEL_EXTRACTOR_HPP_
#define NSX_MODEL_EXTRACTOR_HPP_

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "nsx/ad/layers.hpp"
#include "nsx/model/config.hpp"

namespace nsx {

// Axis masks for the normalization variants over [channel, time, freq].
inline constexpr uint32_t kNormGlobal = 0b111;       // all axes
inline constexpr uint32_t kNormChannelTime = 0b011;  // stats per frequency
inline constexpr uint32_t kNormChannelFreq = 0b101;  // stats per frame
inline constexpr uint32_t kNormFeature = 0b100;      // last axis only

// Extraction network for the near speaker. The complex input spectrogram
// is mapped to D-channel T-F embeddings, refined by C blocks that each
// derive a speaker embedding from the mixture itself, fuse it back in
// through a frequency-axis BLSTM, and attend across frequency (per frame)
// and across time (per frequency). A transposed 3x3 convolution maps back
// to 2-channel RI planes.
template <typename S>
class NearSpeakerExtractor {
 public:
  struct Forward {
    int spec = -1;
    std::vector<int> logits;
  };

  explicit NearSpeakerExtractor(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(splitmix64(cfg_.init_seed ^ 0x9E3779B97F4A7C15ULL));
    build(rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStore<S>& params() { return ps_; }
  const ad::ParamStore<S>& params() const { return ps_; }
  bool has_speaker_head() const { return !cfg_.ablate_se && cfg_.N > 0; }

  // when set, collects the graph ids of every row-softmaxed attention
  // matrix the next forward produces
  std::vector<int>* attention_probe = nullptr;

  // x [2, F, T] -> predicted RI [2, F, T] plus per-block speaker logits
  // (empty when the speaker encoder is ablated or N == 0).
  Forward forward(ad::Graph<S>& g, int x) {
    Forward out;
    int h = encode(g, x);
    for (int c = 0; c < cfg_.C; ++c) {
      int emb = -1;
      if (has_speaker_head()) {
        auto [e, lg] = speaker_path(g, c, h);
        emb = e;
        out.logits.push_back(lg);
      }
      h = fuse_path(g, c, h, emb);
      if (!cfg_.ablate_t_att) h = time_attention(g, c, h);
      if (!cfg_.ablate_f_att) h = freq_attention(g, c, h);
    }
    out.spec = decode(g, h);
    return out;
  }

  // 3x3 convolution to D channels plus global layer norm: [2,F,T] -> [D,T,F]
  int encode(ad::Graph<S>& g, int x) {
    const Tensor<S>& vx = g.val(x);
    if (vx.rank() != 3 || vx.dim(0) != 2 || vx.dim(1) != cfg_.F)
      throw std::invalid_argument("extractor: want [2, F, T], got " + vx.shape_str());
    int h = enc_conv_.apply(g, ps_, x);  // [D, F, T]
    h = ad::permute(g, h, {0, 2, 1});    // [D, T, F]
    return enc_norm_.apply(g, ps_, h);
  }

  // transposed 3x3 convolution, linear activation: [D,T,F] -> [2,F,T]
  int decode(ad::Graph<S>& g, int h) {
    int y = ad::permute(g, h, {0, 2, 1});
    return dec_conv_.apply(g, ps_, y);
  }

  // h [D,T,F] -> (embedding [F], logits [N]). The D channels collapse to a
  // single plane, seen as an F-channel sequence over time; three residual
  // kernel-3 convolutions, adaptive pooling to length 3, then a kernel-3
  // average give one vector per frequency.
  std::pair<int, int> speaker_path(ad::Graph<S>& g, int c, int h) {
    Block& blk = blocks_.at(static_cast<size_t>(c));
    int64_t F = cfg_.F, T = g.val(h).dim(1);
    int r = blk.se_reduce.apply(g, ps_, h);  // [1, T, F]
    r = ad::reshape(g, r, {T, F});
    r = ad::permute(g, r, {1, 0});
    r = ad::reshape(g, r, {F, 1, T});
    for (auto& rb : blk.se_res) {
      int y = rb.conv.apply(g, ps_, r);
      y = rb.act.apply(g, ps_, y);
      r = ad::add(g, r, y);
    }
    r = ad::reshape(g, r, {F, T});
    int pooled = ad::adaptive_avg_pool_last(g, r, 3);
    int emb = ad::mean_axis(g, pooled, 1);  // [F]
    int row = ad::reshape(g, emb, {1, F});
    int lg = blk.se_head.apply(g, ps_, row);
    lg = ad::reshape(g, lg, {static_cast<int64_t>(cfg_.N)});
    return {emb, lg};
  }

  // Fuses the speaker embedding (when given) and runs the frequency-axis
  // BLSTM: unfold bins into overlapping patches, per-frame recurrence over
  // the patch sequence, transposed convolution back to D channels, residual
  // add. Shape-preserving on [D,T,F].
  int fuse_path(ad::Graph<S>& g, int c, int h, int emb = -1) {
    Block& blk = blocks_.at(static_cast<size_t>(c));
    int64_t D = cfg_.D, F = cfg_.F, T = g.val(h).dim(1);
    if (emb >= 0) {
      int e3 = ad::reshape(g, emb, {1, 1, F});
      int rep = ad::tile_axis(g, e3, 1, T);
      int cat = ad::concat(g, {h, rep}, 0);  // [D+1, T, F]
      h = blk.restore.apply(g, ps_, cat);    // back to [D, T, F]
    }
    int64_t Fs = cfg_.unfold_positions();
    int64_t Fpad = cfg_.padded_bins();
    int resid = h;
    int hp = ad::pad_axis(g, h, 2, 0, Fpad - F);
    int col = ad::unfold2d(g, hp, 1, cfg_.I, 1, cfg_.J, 0, 0);  // [D*I, T*Fs]
    col = ad::reshape(g, col, {D * cfg_.I, T, Fs});
    col = ad::permute(g, col, {2, 1, 0});  // [Fs, T, D*I]
    col = blk.fuse_norm.apply(g, ps_, col);
    int r = blk.fuse_rnn.apply(g, ps_, col);  // [Fs, T, 2H]
    r = ad::permute(g, r, {2, 1, 0});         // [2H, T, Fs]
    r = blk.fuse_deconv.apply(g, ps_, r);     // [D, T, Fpad]
    r = ad::slice(g, r, 2, 0, F);
    return ad::add(g, resid, r);
  }

  // attention across frequency, one F x F matrix per head, rows softmaxed
  int time_attention(ad::Graph<S>& g, int c, int h) {
    return attention(g, blocks_.at(static_cast<size_t>(c)).tatt, h, false);
  }

  // attention across frames, one T x T matrix per head
  int freq_attention(ad::Graph<S>& g, int c, int h) {
    return attention(g, blocks_.at(static_cast<size_t>(c)).fatt, h, true);
  }

 private:
  struct ResBlock {
    ad::Conv2dLayer<S> conv;
    ad::PReluLayer<S> act;
  };

  struct Attention {
    std::vector<ad::Conv2dLayer<S>> q_conv, k_conv, v_conv;
    std::vector<ad::PReluLayer<S>> q_act, k_act, v_act;
    std::vector<ad::LayerNormLayer<S>> q_norm, k_norm, v_norm;
    ad::Conv2dLayer<S> out_conv;
    ad::PReluLayer<S> out_act;
    ad::LayerNormLayer<S> out_norm;
  };

  struct Block {
    ad::Conv2dLayer<S> se_reduce;
    std::vector<ResBlock> se_res;
    ad::LinearLayer<S> se_head;
    ad::Conv2dLayer<S> restore;
    ad::LayerNormLayer<S> fuse_norm;
    ad::BlstmLayer<S> fuse_rnn;
    ad::ConvT2dLayer<S> fuse_deconv;
    Attention tatt, fatt;
  };

  void build(Rng& rng) {
    int64_t D = cfg_.D, F = cfg_.F, E = cfg_.E, H = cfg_.H;
    int64_t VD = D / cfg_.L;
    enc_conv_ = ad::Conv2dLayer<S>::create(ps_, "enc.conv", 2, D, 3, 3, 1, 1, 1, 1, rng);
    enc_norm_ = ad::LayerNormLayer<S>::create(ps_, "enc.norm", D, kNormGlobal, 0);

    for (int c = 0; c < cfg_.C; ++c) {
      std::string p = "block" + std::to_string(c) + ".";
      Block blk;
      if (has_speaker_head()) {
        blk.se_reduce =
            ad::Conv2dLayer<S>::create(ps_, p + "se.reduce", D, 1, 1, 1, 1, 1, 0, 0, rng);
        for (int r = 0; r < 3; ++r) {
          std::string rp = p + "se.res" + std::to_string(r);
          ResBlock rb;
          rb.conv = ad::Conv2dLayer<S>::create(ps_, rp + ".conv", F, F, 1, 3, 1, 1, 0, 1, rng);
          rb.act = ad::PReluLayer<S>::create(ps_, rp + ".act", F, 0);
          blk.se_res.push_back(rb);
        }
        blk.se_head = ad::LinearLayer<S>::create(ps_, p + "se.head", F, cfg_.N, rng);
        blk.restore =
            ad::Conv2dLayer<S>::create(ps_, p + "fuse.restore", D + 1, D, 1, 1, 1, 1, 0, 0, rng);
      }
      blk.fuse_norm = ad::LayerNormLayer<S>::create(
          ps_, p + "fuse.norm", static_cast<int64_t>(cfg_.I) * D, kNormFeature, 2);
      blk.fuse_rnn =
          ad::BlstmLayer<S>::create(ps_, p + "fuse.rnn", static_cast<int64_t>(cfg_.I) * D, H, rng);
      blk.fuse_deconv = ad::ConvT2dLayer<S>::create(ps_, p + "fuse.deconv", 2 * H, D, 1, cfg_.I, 1,
                                                    cfg_.J, 0, 0, 0, 0, rng);
      if (!cfg_.ablate_t_att)
        blk.tatt = make_attention(p + "tatt.", D, E, VD, kNormChannelTime, rng);
      if (!cfg_.ablate_f_att)
        blk.fatt = make_attention(p + "fatt.", D, E, VD, kNormChannelFreq, rng);
      blocks_.push_back(std::move(blk));
    }

    dec_conv_ = ad::ConvT2dLayer<S>::create(ps_, "dec.conv", D, 2, 3, 3, 1, 1, 1, 1, 0, 0, rng);
  }

  Attention make_attention(const std::string& p, int64_t D, int64_t E, int64_t VD, uint32_t mask,
                           Rng& rng) {
    Attention att;
    for (int l = 0; l < cfg_.L; ++l) {
      std::string hp = p + "head" + std::to_string(l) + ".";
      att.q_conv.push_back(ad::Conv2dLayer<S>::create(ps_, hp + "q", D, E, 1, 1, 1, 1, 0, 0, rng));
      att.k_conv.push_back(ad::Conv2dLayer<S>::create(ps_, hp + "k", D, E, 1, 1, 1, 1, 0, 0, rng));
      att.v_conv.push_back(ad::Conv2dLayer<S>::create(ps_, hp + "v", D, VD, 1, 1, 1, 1, 0, 0, rng));
      att.q_act.push_back(ad::PReluLayer<S>::create(ps_, hp + "q.act", E, 0));
      att.k_act.push_back(ad::PReluLayer<S>::create(ps_, hp + "k.act", E, 0));
      att.v_act.push_back(ad::PReluLayer<S>::create(ps_, hp + "v.act", VD, 0));
      att.q_norm.push_back(ad::LayerNormLayer<S>::create(ps_, hp + "q.norm", E, mask, 0));
      att.k_norm.push_back(ad::LayerNormLayer<S>::create(ps_, hp + "k.norm", E, mask, 0));
      att.v_norm.push_back(ad::LayerNormLayer<S>::create(ps_, hp + "v.norm", VD, mask, 0));
    }
    att.out_conv = ad::Conv2dLayer<S>::create(ps_, p + "out", D, D, 1, 1, 1, 1, 0, 0, rng);
    att.out_act = ad::PReluLayer<S>::create(ps_, p + "out.act", D, 0);
    att.out_norm = ad::LayerNormLayer<S>::create(ps_, p + "out.norm", D, mask, 0);
    return att;
  }

  // freq_mode false: rows are frequencies, keys run over frames (one F x F
  // matrix); true: roles swapped (one T x T matrix).
  int attention(ad::Graph<S>& g, Attention& att, int h, bool freq_mode) {
    int64_t D = cfg_.D, F = cfg_.F, E = cfg_.E, T = g.val(h).dim(1);
    int64_t VD = D / cfg_.L;
    int resid = h;
    std::vector<int> heads;
    S scl = freq_mode ? S(1) / static_cast<S>(std::sqrt(static_cast<double>(F * E)))
                      : S(1) / static_cast<S>(std::sqrt(static_cast<double>(T * E)));
    for (size_t l = 0; l < static_cast<size_t>(cfg_.L); ++l) {
      auto project = [&](ad::Conv2dLayer<S>& conv, ad::PReluLayer<S>& act,
                         ad::LayerNormLayer<S>& norm, int64_t ch) {
        int t = conv.apply(g, ps_, h);
        t = act.apply(g, ps_, t);
        t = norm.apply(g, ps_, t);  // [ch, T, F]
        if (freq_mode) {
          t = ad::permute(g, t, {1, 2, 0});  // [T, F, ch]
          return ad::reshape(g, t, {T, F * ch});
        }
        t = ad::permute(g, t, {2, 1, 0});  // [F, T, ch]
        return ad::reshape(g, t, {F, T * ch});
      };
      int q = project(att.q_conv[l], att.q_act[l], att.q_norm[l], E);
      int k = project(att.k_conv[l], att.k_act[l], att.k_norm[l], E);
      int v = project(att.v_conv[l], att.v_act[l], att.v_norm[l], VD);
      int scores = ad::scale(g, ad::matmul(g, q, ad::permute(g, k, {1, 0})), scl);
      int A = ad::softmax_rows(g, scores);
      if (attention_probe) attention_probe->push_back(A);
      int o = ad::matmul(g, A, v);
      o = freq_mode ? ad::reshape(g, o, {T, F, VD}) : ad::reshape(g, o, {F, T, VD});
      heads.push_back(o);
    }
    int cat = ad::concat(g, heads, 2);
    cat = freq_mode ? ad::permute(g, cat, {2, 0, 1})   // [D, T, F]
                    : ad::permute(g, cat, {2, 1, 0});  // [D, T, F]
    int y = att.out_conv.apply(g, ps_, cat);
    y = att.out_act.apply(g, ps_, y);
    y = att.out_norm.apply(g, ps_, y);
    return ad::add(g, resid, y);
  }

  ModelConfig cfg_;
  ad::ParamStore<S> ps_;
  ad::Conv2dLayer<S> enc_conv_;
  ad::LayerNormLayer<S> enc_norm_;
  ad::ConvT2dLayer<S> dec_conv_;
  std::vector<Block> blocks_;
};

}  // namespace nsx

#endif  // NSX_MODEL_EXTRACTOR_HPP_
