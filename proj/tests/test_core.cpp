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

#include <cstdio>
#include <filesystem>

#include "nsx/core/fft.hpp"
#include "nsx/core/rng.hpp"
#include "nsx/core/tensor.hpp"
#include "nsx/core/wav.hpp"

using namespace nsx;

TEST_CASE("tensor shape and buffer sharing", "[core]") {
  Tensor<float> t({2, 3, 4});
  REQUIRE(t.size() == 24);
  REQUIRE(t.dim(1) == 3);
  t[5] = 7.0f;
  Tensor<float> r = t.reshaped({4, 6});
  REQUIRE(r[5] == 7.0f);
  r[5] = 9.0f;
  REQUIRE(t[5] == 9.0f);  // reshape shares the buffer
  Tensor<float> c = t.clone();
  c[5] = 1.0f;
  REQUIRE(t[5] == 9.0f);
  REQUIRE_THROWS(Tensor<float>({2, 2}, {1.0f, 2.0f, 3.0f}));
}

TEST_CASE("splitmix64 reference vector", "[core]") {
  REQUIRE(splitmix64(0) == 0xE220A8397B1DCDAFULL);
}

TEST_CASE("rng determinism and forks", "[core]") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  Rng c(42);
  Rng f0 = c.fork(0), f1 = c.fork(1);
  REQUIRE(f0.next_u64() != f1.next_u64());

  Rng u(7);
  for (int i = 0; i < 1000; ++i) {
    double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    int64_t k = u.uniform_int(10);
    REQUIRE(k >= 0);
    REQUIRE(k < 10);
  }
}

TEST_CASE("rng normal moments", "[core]") {
  Rng g(123);
  double sum = 0, sum2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = g.normal();
    sum += x;
    sum2 += x * x;
  }
  double mean = sum / n, var = sum2 / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.03);
  REQUIRE(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("wav float32 roundtrip is exact", "[core]") {
  Rng g(5);
  std::vector<float> w(1234);
  for (auto& v : w) v = static_cast<float>(g.uniform(-0.9, 0.9));
  auto path = std::filesystem::temp_directory_path() / "nsx_test_f32.wav";
  write_wav_f32(path.string(), w, 16000);
  WavData r = read_wav(path.string());
  REQUIRE(r.sample_rate == 16000);
  REQUIRE(r.samples.size() == w.size());
  for (size_t i = 0; i < w.size(); ++i) REQUIRE(r.samples[i] == w[i]);
  std::filesystem::remove(path);
}

TEST_CASE("wav pcm16 roundtrip within quantization", "[core]") {
  Rng g(6);
  std::vector<float> w(777);
  for (auto& v : w) v = static_cast<float>(g.uniform(-0.9, 0.9));
  auto path = std::filesystem::temp_directory_path() / "nsx_test_p16.wav";
  write_wav_pcm16(path.string(), w, 8000);
  WavData r = read_wav(path.string());
  REQUIRE(r.sample_rate == 8000);
  REQUIRE(r.samples.size() == w.size());
  for (size_t i = 0; i < w.size(); ++i)
    REQUIRE(std::abs(r.samples[i] - w[i]) < 1.0f / 32000.0f);
  std::filesystem::remove(path);
}

TEST_CASE("wav read rejects missing file", "[core]") {
  REQUIRE_THROWS(read_wav("/nonexistent/nsx_nope.wav"));
}

TEST_CASE("fft convolution matches direct convolution", "[core]") {
  Rng g(9);
  std::vector<float> a(50), b(13);
  for (auto& v : a) v = static_cast<float>(g.normal());
  for (auto& v : b) v = static_cast<float>(g.normal());
  auto fast = fft_convolve(a, b);
  REQUIRE(fast.size() == a.size() + b.size() - 1);
  for (size_t n = 0; n < fast.size(); ++n) {
    double acc = 0;
    for (size_t k = 0; k < b.size(); ++k)
      if (n >= k && n - k < a.size()) acc += static_cast<double>(a[n - k]) * b[k];
    REQUIRE(std::abs(fast[n] - acc) < 1e-5);
  }
}

TEST_CASE("fft convolution with unit impulse is identity", "[core]") {
  std::vector<float> a = {1.0f, -2.0f, 3.0f, 0.5f};
  std::vector<float> d = {1.0f};
  auto y = fft_convolve(a, d);
  REQUIRE(y.size() == 4);
  for (size_t i = 0; i < a.size(); ++i) REQUIRE(std::abs(y[i] - a[i]) < 1e-6);
}
