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
#include <vector>

#include "nsx/core/rng.hpp"
#include "nsx/signal/metrics.hpp"
#include "nsx/signal/stft.hpp"

using namespace nsx;

namespace {
std::vector<float> random_wave(size_t n, uint64_t seed) {
  Rng g(seed);
  std::vector<float> w(n);
  for (auto& v : w) v = static_cast<float>(g.uniform(-0.7, 0.7));
  return w;
}
}  // namespace

TEST_CASE("stft shape for 5 s input", "[signal]") {
  auto w = random_wave(80000, 1);
  auto spec = stft(w);
  REQUIRE(spec.bins() == 129);
  REQUIRE(spec.frames() == 626);
  REQUIRE(spec.ri.shape() == std::vector<int64_t>{2, 129, 626});
}

TEST_CASE("stft of zeros is zero", "[signal]") {
  std::vector<float> w(4000, 0.0f);
  auto spec = stft(w);
  for (size_t i = 0; i < spec.ri.size(); ++i) REQUIRE(spec.ri[i] == 0.0f);
}

TEST_CASE("1 kHz tone concentrates at bin 16", "[signal]") {
  std::vector<float> w(16000);
  for (size_t n = 0; n < w.size(); ++n)
    w[n] = static_cast<float>(0.5 * std::sin(2.0 * M_PI * 1000.0 * n / 16000.0));
  auto spec = stft(w);
  size_t F = static_cast<size_t>(spec.bins()), T = static_cast<size_t>(spec.frames());
  // skip edge frames where reflection padding shifts energy
  for (size_t t = 5; t + 5 < T; ++t) {
    double best = -1;
    size_t best_f = 0;
    for (size_t f = 0; f < F; ++f) {
      float re = spec.ri[f * T + t];
      float im = spec.ri[F * T + f * T + t];
      double mag = static_cast<double>(re) * re + static_cast<double>(im) * im;
      if (mag > best) {
        best = mag;
        best_f = f;
      }
    }
    REQUIRE(best_f == 16);
  }
}

TEST_CASE("istft inverts stft", "[signal]") {
  for (uint64_t seed : {2ULL, 3ULL, 4ULL}) {
    auto w = random_wave(16000, seed);
    auto spec = stft(w);
    auto rec = istft(spec, w.size());
    REQUIRE(rec.size() == w.size());
    double num = 0, den = 0, worst = 0;
    for (size_t i = 0; i < w.size(); ++i) {
      double d = static_cast<double>(rec[i]) - w[i];
      num += d * d;
      den += static_cast<double>(w[i]) * w[i];
      worst = std::max(worst, std::abs(d));
    }
    REQUIRE(worst < 1e-6);
    REQUIRE(std::sqrt(num / den) < 1e-6);
  }
}

TEST_CASE("istft roundtrip on awkward lengths", "[signal]") {
  for (size_t n : {256UL, 257UL, 300UL, 1000UL, 1025UL}) {
    auto w = random_wave(n, 77 + n);
    auto rec = istft(stft(w), n);
    REQUIRE(rec.size() == n);
    for (size_t i = 0; i < n; ++i) REQUIRE(std::abs(rec[i] - w[i]) < 1e-6);
  }
}

TEST_CASE("istft of zeros is zero and respects length", "[signal]") {
  StftConfig cfg;
  ComplexSpectrogram spec;
  spec.cfg = cfg;
  spec.ri = Tensor<float>({2, cfg.bins(), 20});
  auto w = istft(spec, 1000);
  REQUIRE(w.size() == 1000);
  for (float v : w) REQUIRE(v == 0.0f);
}

TEST_CASE("sqrt-hann window pair satisfies overlap-add", "[signal]") {
  auto win = stft_detail::sqrt_hann(256);
  // squared window summed at hop 128 over interior samples
  for (int n = 0; n < 128; ++n) {
    double s = static_cast<double>(win[static_cast<size_t>(n)]) * win[static_cast<size_t>(n)] +
               static_cast<double>(win[static_cast<size_t>(n + 128)]) * win[static_cast<size_t>(n + 128)];
    REQUIRE(std::abs(s - 1.0) < 1e-10);
  }
}

TEST_CASE("windowed frame energy matches compensated spectrogram energy", "[signal]") {
  auto w = random_wave(5000, 11);
  StftConfig cfg;
  auto spec = stft(w, cfg);

  // oracle: re-frame and window the padded signal in the time domain
  auto win = stft_detail::sqrt_hann(cfg.win);
  size_t T = static_cast<size_t>(spec.frames());
  double time_energy = 0;
  int64_t pad = cfg.win / 2;
  int64_t len = static_cast<int64_t>(w.size());
  for (size_t t = 0; t < T; ++t) {
    for (int i = 0; i < cfg.win; ++i) {
      int64_t src = static_cast<int64_t>(t) * cfg.hop + i - pad;
      double v = w[static_cast<size_t>(stft_detail::mirror_index(src, len))] * win[static_cast<size_t>(i)];
      time_energy += v * v;
    }
  }

  size_t F = static_cast<size_t>(spec.bins());
  double spec_energy = 0;
  for (size_t f = 0; f < F; ++f) {
    double weight = (f == 0 || f == F - 1) ? 1.0 : 2.0;
    for (size_t t = 0; t < T; ++t) {
      double re = spec.ri[f * T + t];
      double im = spec.ri[F * T + f * T + t];
      spec_energy += weight * (re * re + im * im);
    }
  }
  spec_energy /= static_cast<double>(cfg.win);
  REQUIRE(time_energy > 0.0);
  REQUIRE(spec_energy == Catch::Approx(time_energy).epsilon(1e-5));
}

TEST_CASE("si_sdr hand cases", "[signal]") {
  std::vector<float> ref = {1.0f, 0.0f};
  std::vector<float> est = {1.0f, 1.0f};
  REQUIRE(si_sdr(est, ref) == Catch::Approx(0.0).margin(1e-9));

  REQUIRE(si_sdr(ref, ref) == 60.0);

  std::vector<float> zeros = {0.0f, 0.0f};
  REQUIRE(si_sdr(zeros, ref) == -60.0);
  REQUIRE_THROWS(si_sdr(ref, zeros));

  std::vector<float> short_e = {1.0f};
  REQUIRE_THROWS(si_sdr(short_e, ref));
}

TEST_CASE("si_sdr is scale invariant", "[signal]") {
  auto ref = random_wave(512, 21);
  auto est = random_wave(512, 22);
  double base = si_sdr(est, ref);
  auto scaled = est;
  for (auto& v : scaled) v *= 2.0f;
  REQUIRE(std::abs(si_sdr(scaled, ref) - base) < 1e-6);
}

TEST_CASE("si_sdr improvement identities", "[signal]") {
  auto ref = random_wave(512, 31);
  auto mix = random_wave(512, 32);
  REQUIRE(si_sdr_improvement(mix, mix, ref) == Catch::Approx(0.0).margin(1e-12));
  double expect = 60.0 - si_sdr(mix, ref);
  REQUIRE(si_sdr_improvement(ref, mix, ref) == Catch::Approx(expect).margin(1e-9));
}
