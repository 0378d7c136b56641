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

#ifndef NSX_MODEL_BASELINES_HPP_
#define NSX_MODEL_BASELINES_HPP_

#include <string>
#include <vector>

#include "nsx/ad/layers.hpp"
#include "nsx/model/config.hpp"

namespace nsx {

// Ten-layer U-Net over the RI planes: five stride-2 encoder convolutions
// widening 16, 32, 64, 128, 256, five transposed convolutions back up with
// skip concatenation, linear 2-channel output. Input is padded to the next
// multiple of 32 on both axes and trimmed at the end.
template <typename S>
class UnetModel {
 public:
  explicit UnetModel(const ModelConfig& cfg) : cfg_(cfg) {
    Rng rng(splitmix64(cfg_.init_seed ^ 0xA24BAED4963EE407ULL));
    const int64_t w[5] = {16, 32, 64, 128, 256};
    int64_t in = 2;
    for (int i = 0; i < 5; ++i) {
      std::string p = "enc" + std::to_string(i);
      enc_.push_back(ad::Conv2dLayer<S>::create(ps_, p, in, w[i], 3, 3, 2, 2, 1, 1, rng));
      enc_act_.push_back(ad::PReluLayer<S>::create(ps_, p + ".act", w[i], 0));
      in = w[i];
    }
    for (int i = 0; i < 5; ++i) {
      std::string p = "dec" + std::to_string(i);
      // after the first level the input carries the skip channels too
      int64_t din = (i == 0) ? w[4] : 2 * w[4 - i];
      int64_t dout = (i == 4) ? 2 : w[3 - i];
      dec_.push_back(ad::ConvT2dLayer<S>::create(ps_, p, din, dout, 3, 3, 2, 2, 1, 1, 1, 1, rng));
      if (i < 4) dec_act_.push_back(ad::PReluLayer<S>::create(ps_, p + ".act", dout, 0));
    }
  }

  ad::ParamStore<S>& params() { return ps_; }
  const ad::ParamStore<S>& params() const { return ps_; }

  // x [2, F, T] -> [2, F, T]
  int forward(ad::Graph<S>& g, int x) {
    const Tensor<S>& vx = g.val(x);
    if (vx.rank() != 3 || vx.dim(0) != 2)
      throw std::invalid_argument("unet: want [2, F, T], got " + vx.shape_str());
    int64_t F = vx.dim(1), T = vx.dim(2);
    int64_t Fp = ((F + 31) / 32) * 32;
    int64_t Tp = ((T + 31) / 32) * 32;
    int h = ad::pad_axis(g, x, 1, 0, Fp - F);
    h = ad::pad_axis(g, h, 2, 0, Tp - T);
    std::vector<int> skips;
    for (size_t i = 0; i < enc_.size(); ++i) {
      h = enc_[i].apply(g, ps_, h);
      h = enc_act_[i].apply(g, ps_, h);
      skips.push_back(h);
    }
    for (size_t i = 0; i < dec_.size(); ++i) {
      h = dec_[i].apply(g, ps_, h);
      if (i < 4) {
        h = dec_act_[i].apply(g, ps_, h);
        h = ad::concat(g, {h, skips[3 - i]}, 0);
      }
    }
    h = ad::slice(g, h, 1, 0, F);
    return ad::slice(g, h, 2, 0, T);
  }

 private:
  ModelConfig cfg_;
  ad::ParamStore<S> ps_;
  std::vector<ad::Conv2dLayer<S>> enc_;
  std::vector<ad::PReluLayer<S>> enc_act_;
  std::vector<ad::ConvT2dLayer<S>> dec_;
  std::vector<ad::PReluLayer<S>> dec_act_;
};

// Stacked bidirectional LSTM over the frame sequence. Per-frame features
// are the magnitude plus the raw RI planes (3F wide); a linear head maps
// the final hidden states back to 2F RI values.
template <typename S>
class BlstmModel {
 public:
  explicit BlstmModel(const ModelConfig& cfg) : cfg_(cfg) {
    Rng rng(splitmix64(cfg_.init_seed ^ 0x6C62272E07BB0142ULL));
    int64_t F = cfg_.F, W = cfg_.lstm_width;
    int64_t in = 3 * F;
    for (int l = 0; l < cfg_.lstm_layers; ++l) {
      rnns_.push_back(ad::BlstmLayer<S>::create(ps_, "rnn" + std::to_string(l), in, W, rng));
      in = 2 * W;
    }
    head_ = ad::LinearLayer<S>::create(ps_, "head", in, 2 * F, rng);
  }

  ad::ParamStore<S>& params() { return ps_; }
  const ad::ParamStore<S>& params() const { return ps_; }

  // x [2, F, T] -> [2, F, T]
  int forward(ad::Graph<S>& g, int x) {
    const Tensor<S>& vx = g.val(x);
    if (vx.rank() != 3 || vx.dim(0) != 2 || vx.dim(1) != cfg_.F)
      throw std::invalid_argument("blstm: want [2, F, T], got " + vx.shape_str());
    int64_t F = cfg_.F, T = vx.dim(2);
    int re = ad::slice(g, x, 0, 0, 1);
    int im = ad::slice(g, x, 0, 1, 1);
    int power = ad::add(g, ad::hadamard(g, re, re), ad::hadamard(g, im, im));
    int mag = ad::sqrt_eps(g, power, S(1e-8));
    int feat = ad::concat(g, {mag, x}, 0);            // [3, F, T]
    feat = ad::permute(g, feat, {2, 0, 1});           // [T, 3, F]
    feat = ad::reshape(g, feat, {T, 1, 3 * F});
    int h = feat;
    for (auto& rnn : rnns_) h = rnn.apply(g, ps_, h); // [T, 1, 2W]
    h = ad::reshape(g, h, {T, g.val(h).dim(2)});
    int y = head_.apply(g, ps_, h);                   // [T, 2F]
    y = ad::reshape(g, y, {T, 2, F});
    return ad::permute(g, y, {1, 2, 0});              // [2, F, T]
  }

 private:
  ModelConfig cfg_;
  ad::ParamStore<S> ps_;
  std::vector<ad::BlstmLayer<S>> rnns_;
  ad::LinearLayer<S> head_;
};

}  // namespace nsx

#endif  // NSX_MODEL_BASELINES_HPP_
