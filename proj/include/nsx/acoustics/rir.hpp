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

#ifndef NSX_ACOUSTICS_RIR_HPP_
#define NSX_ACOUSTICS_RIR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nsx/acoustics/scene.hpp"
#include "nsx/core/rng.hpp"

namespace nsx {

constexpr double kSoundSpeed = 343.0;
constexpr int kRirSampleRate = 16000;
constexpr double kImagePerturbMeters = 0.08;

struct ImpulseResponse {
  std::vector<float> samples;
  double source_distance = 0.0;
  std::string scene_ref;
  int source_index = -1;
};

// Mean wall absorption that yields the requested reverberation time in the
// given shoebox, by Eyring's formula. Always < 1 for positive rt60.
inline double eyring_absorption(const Vec3& dims, double rt60) {
  if (rt60 <= 0.0) throw std::invalid_argument("eyring_absorption: rt60 must be positive");
  double volume = dims[0] * dims[1] * dims[2];
  double surface = 2.0 * (dims[0] * dims[1] + dims[0] * dims[2] + dims[1] * dims[2]);
  return 1.0 - std::exp(-0.161 * volume / (surface * rt60));
}

namespace rir_detail {

constexpr int kSincTaps = 81;
constexpr int kSincHalf = kSincTaps / 2;  // 40, also the interpolation latency

inline double windowed_sinc(double x) {
  double half = kSincHalf + 0.5;
  if (std::abs(x) >= half) return 0.0;
  double w = 0.5 * (1.0 + std::cos(2.0 * M_PI * x / (2.0 * half)));
  if (x == 0.0) return w;
  double px = M_PI * x;
  return w * std::sin(px) / px;
}

// Core image-source renderer with an explicit reflection coefficient.
// Images are jittered uniformly per axis except the direct path, kernels
// are placed with a 40-sample interpolation latency, and anything landing
// before the direct arrival is cleared.
inline ImpulseResponse render_images(const RoomScene& scene, int source_index, int sample_rate,
                                     double displacement, double beta) {
  if (sample_rate != kRirSampleRate)
    throw std::invalid_argument("render_images: unsupported sample rate");
  if (source_index < 0 || source_index >= static_cast<int>(scene.source_positions.size()))
    throw std::out_of_range("render_images: bad source index");

  const Vec3& L = scene.dims;
  const Vec3& s = scene.source_positions[static_cast<size_t>(source_index)];
  const Vec3& m = scene.mic_pos;
  double dist_direct = distance(s, m);

  double fs = static_cast<double>(sample_rate);
  double tau_direct = dist_direct / kSoundSpeed * fs;
  int n_samples = static_cast<int>(std::ceil((dist_direct / kSoundSpeed + scene.rt60) * fs)) + kSincTaps;

  double min_dim = std::min({L[0], L[1], L[2]});
  int order = static_cast<int>(std::ceil(kSoundSpeed * scene.rt60 / min_dim)) + 1;
  double reach = kSoundSpeed * scene.rt60 + dist_direct + 2.0;
  auto axis_count = [&](double dim) {
    int need = static_cast<int>(std::ceil(reach / (2.0 * dim))) + 1;
    return std::min(order, need);
  };
  int nx = axis_count(L[0]), ny = axis_count(L[1]), nz = axis_count(L[2]);

  std::vector<double> beta_pow(static_cast<size_t>(6 * (order + 1) + 1), 1.0);
  for (size_t i = 1; i < beta_pow.size(); ++i) beta_pow[i] = beta_pow[i - 1] * beta;

  Rng rng(splitmix64(scene.seed ^ splitmix64(0xA11CE5ULL + static_cast<uint64_t>(source_index))));
  double max_delay = static_cast<double>(n_samples);

  std::vector<double> h(static_cast<size_t>(n_samples), 0.0);
  for (int mx = -nx; mx <= nx; ++mx) {
    for (int my = -ny; my <= ny; ++my) {
      for (int mz = -nz; mz <= nz; ++mz) {
        for (int q = 0; q <= 1; ++q) {
          for (int j = 0; j <= 1; ++j) {
            for (int k = 0; k <= 1; ++k) {
              double jit[3] = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
              bool direct = (mx == 0 && my == 0 && mz == 0 && q == 0 && j == 0 && k == 0);
              double px = (1 - 2 * q) * s[0] + 2.0 * mx * L[0];
              double py = (1 - 2 * j) * s[1] + 2.0 * my * L[1];
              double pz = (1 - 2 * k) * s[2] + 2.0 * mz * L[2];
              if (!direct && displacement > 0.0) {
                px += jit[0] * displacement;
                py += jit[1] * displacement;
                pz += jit[2] * displacement;
              }
              int refl = std::abs(mx - q) + std::abs(mx) + std::abs(my - j) + std::abs(my) +
                         std::abs(mz - k) + std::abs(mz);
              double g = beta_pow[static_cast<size_t>(refl)];
              if (g == 0.0 && !direct) continue;
              double dx = px - m[0], dy = py - m[1], dz = pz - m[2];
              double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
              double tau = dist / kSoundSpeed * fs;
              if (tau >= max_delay) continue;
              double amp = g / (4.0 * M_PI * std::max(dist, 1e-3));
              int base = static_cast<int>(std::floor(tau));
              double mu = tau - base;
              // sin(pi*(k - mu)) only flips sign with k, and the Hann window
              // advances by a fixed angle per tap, so one sin and two cos
              // seed the whole kernel.
              double smu = std::sin(M_PI * mu);
              double theta0 = 2.0 * M_PI * (-kSincHalf - mu) / kSincTaps;
              double delta = 2.0 * M_PI / kSincTaps;
              double c_prev = std::cos(theta0 - delta);
              double c_cur = std::cos(theta0);
              double two_cd = 2.0 * std::cos(delta);
              double half = kSincHalf + 0.5;
              for (int n = 0; n < kSincTaps; ++n) {
                double x = static_cast<double>(n - kSincHalf) - mu;
                double c_next = two_cd * c_cur - c_prev;
                double w = 0.5 * (1.0 + c_cur);
                c_prev = c_cur;
                c_cur = c_next;
                int p = base + n;
                if (p < 0 || p >= n_samples || std::abs(x) >= half) continue;
                double sinc;
                if (x == 0.0) {
                  sinc = 1.0;
                } else {
                  int k2 = n - kSincHalf;
                  double sgn = (k2 & 1) ? 1.0 : -1.0;
                  sinc = sgn * smu / (M_PI * x);
                }
                h[static_cast<size_t>(p)] += amp * w * sinc;
              }
            }
          }
        }
      }
    }
  }

  int first = static_cast<int>(std::floor(tau_direct));
  for (int i = 0; i < std::min(first, n_samples); ++i) h[static_cast<size_t>(i)] = 0.0;

  ImpulseResponse out;
  out.samples.resize(h.size());
  for (size_t i = 0; i < h.size(); ++i) out.samples[i] = static_cast<float>(h[i]);
  out.source_distance = dist_direct;
  out.source_index = source_index;
  return out;
}

// Image lattice decay statistics. A room with uniform reflectivity decays
// as a direction average of exponentials, so the Schroeder fit of a
// rendered RIR sits well above the Eyring prediction; this model finds the
// reflectivity whose simulated T20 fit lands on the requested rt60.
struct DecayModel {
  std::vector<double> g;  // per-direction wall-hit rates, scaled by c
  double direct_energy = 0.0;
  double t_direct = 0.0;
  double horizon = 0.0;
  double diffuse_scale = 0.0;

  DecayModel(const Vec3& dims, double rt60, double direct_dist) {
    double V = dims[0] * dims[1] * dims[2];
    // Fibonacci lattice on the sphere; |u|-symmetric so one octant suffices
    const int n_dirs = 192;
    g.reserve(n_dirs);
    for (int i = 0; i < n_dirs; ++i) {
      double z = (i + 0.5) / n_dirs;  // cos(theta) in (0,1)
      double phi = 2.399963229728653 * i;
      double rxy = std::sqrt(1.0 - z * z);
      double ux = std::abs(rxy * std::cos(phi));
      double uy = std::abs(rxy * std::sin(phi));
      double uz = z;
      g.push_back(kSoundSpeed * (ux / dims[0] + uy / dims[1] + uz / dims[2]));
    }
    t_direct = direct_dist / kSoundSpeed;
    direct_energy = 1.0 / std::pow(4.0 * M_PI * direct_dist, 2.0);
    horizon = t_direct + rt60;
    diffuse_scale = kSoundSpeed / (4.0 * M_PI * V);
  }

  // T20 Schroeder fit of the modeled decay for a given reflectivity.
  double t20_fit(double beta) const {
    double lb2 = 2.0 * std::log(std::max(beta, 1e-6));
    const int nt = 256;
    double dt = horizon / nt;
    std::vector<double> energy(static_cast<size_t>(nt), 0.0);
    for (int i = 0; i < nt; ++i) {
      double t = (i + 0.5) * dt;
      double acc = 0.0;
      for (double gi : g) acc += std::exp(lb2 * t * gi);
      energy[static_cast<size_t>(i)] = diffuse_scale * acc / static_cast<double>(g.size()) * dt;
    }
    int direct_bin = std::min(nt - 1, static_cast<int>(t_direct / dt));
    energy[static_cast<size_t>(direct_bin)] += direct_energy;

    std::vector<double> edc(static_cast<size_t>(nt));
    double acc = 0.0;
    for (int i = nt; i-- > 0;) {
      acc += energy[static_cast<size_t>(i)];
      edc[static_cast<size_t>(i)] = acc;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (int i = 0; i < nt; ++i) {
      double db = 10.0 * std::log10(std::max(edc[static_cast<size_t>(i)] / edc[0], 1e-30));
      if (db > -5.0 || db < -25.0) continue;
      double t = (i + 0.5) * dt;
      sx += t;
      sy += db;
      sxx += t * t;
      sxy += t * db;
      ++count;
    }
    if (count < 4) return -1.0;
    double denom = count * sxx - sx * sx;
    double slope = (count * sxy - sx * sy) / denom;
    if (slope >= 0.0) return -1.0;
    return -60.0 / slope;
  }

  double solve(double rt60) const {
    double lo = 0.02, hi = 0.999;
    for (int it = 0; it < 48; ++it) {
      double mid = 0.5 * (lo + hi);
      double t = t20_fit(mid);
      if (t < 0.0 || t < rt60)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  }
};

}  // namespace rir_detail

inline double estimate_rt60(const std::vector<float>& rir, int sample_rate);

// Reflectivity for a scene: Eyring absorption trimmed by the lattice decay
// model seeds an empirical loop that renders the first source and nudges
// the coefficient until the measured T20 lands on the scene rt60. Memoized
// since every source in a scene shares the walls.
inline double scene_reflectivity(const RoomScene& scene, double displacement = kImagePerturbMeters) {
  double alpha = eyring_absorption(scene.dims, scene.rt60);
  if (!(alpha < 1.0 - 1e-12))
    throw std::invalid_argument("scene_reflectivity: rt60 too small, full absorption");

  auto mix = [](uint64_t h, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    return splitmix64(h ^ bits);
  };
  uint64_t key = splitmix64(scene.seed);
  key = mix(key, scene.rt60);
  for (int a = 0; a < 3; ++a) key = mix(key, scene.dims[a]);
  for (int a = 0; a < 3; ++a) key = mix(key, scene.mic_pos[a]);
  for (int a = 0; a < 3; ++a) key = mix(key, scene.source_positions.at(0)[a]);
  key = mix(key, displacement);

  static thread_local std::unordered_map<uint64_t, double> cache;
  auto hit = cache.find(key);
  if (hit != cache.end()) return hit->second;

  rir_detail::DecayModel model(scene.dims, scene.rt60, scene.source_distance(0));
  double x = 2.0 * std::log(model.solve(scene.rt60));

  double best_beta = std::exp(0.5 * x), best_err = 1e9;
  for (int iter = 0; iter < 4; ++iter) {
    double beta = std::exp(0.5 * x);
    ImpulseResponse probe = rir_detail::render_images(scene, 0, kRirSampleRate, displacement, beta);
    double est = -1.0;
    try {
      est = estimate_rt60(probe.samples, kRirSampleRate);
    } catch (const std::exception&) {
    }
    if (est <= 0.0) {  // decay never resolved: force more absorption
      x *= 1.5;
      continue;
    }
    double err = std::abs(est / scene.rt60 - 1.0);
    if (err < best_err) {
      best_err = err;
      best_beta = beta;
    }
    if (err <= 0.04) break;
    x *= est / scene.rt60;
  }
  cache.emplace(key, best_beta);
  return best_beta;
}

// Renders the impulse response from one scene source to the microphone at
// 16 kHz with the scene's reverberation time mapped to wall reflectivity.
inline ImpulseResponse generate_rir(const RoomScene& scene, int source_index,
                                    int sample_rate = kRirSampleRate,
                                    double displacement = kImagePerturbMeters) {
  if (source_index < 0 || source_index >= static_cast<int>(scene.source_positions.size()))
    throw std::out_of_range("generate_rir: bad source index");
  double beta = scene_reflectivity(scene, displacement);
  return rir_detail::render_images(scene, source_index, sample_rate, displacement, beta);
}

// Reverberation time from the backward-integrated energy decay curve.
// Fits the -5..-25 dB span and extrapolates the slope to -60 dB.
inline double estimate_rt60(const std::vector<float>& rir, int sample_rate = kRirSampleRate) {
  if (rir.size() < 16) throw std::invalid_argument("estimate_rt60: impulse response too short");
  size_t n = rir.size();
  std::vector<double> edc(n);
  double acc = 0.0;
  for (size_t i = n; i-- > 0;) {
    double v = static_cast<double>(rir[i]);
    acc += v * v;
    edc[i] = acc;
  }
  double total = edc[0];
  if (total <= 0.0) throw std::invalid_argument("estimate_rt60: zero-energy impulse response");

  std::vector<double> db(n);
  for (size_t i = 0; i < n; ++i) db[i] = 10.0 * std::log10(std::max(edc[i] / total, 1e-30));

  // Least-squares line over samples whose decay sits in the fit span.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  size_t count = 0;
  for (size_t i = 0; i < n; ++i) {
    if (db[i] > -5.0 || db[i] < -25.0) continue;
    double t = static_cast<double>(i) / sample_rate;
    sx += t;
    sy += db[i];
    sxx += t * t;
    sxy += t * db[i];
    ++count;
  }
  if (count < 8) throw std::runtime_error("estimate_rt60: decay range not covered");
  double denom = static_cast<double>(count) * sxx - sx * sx;
  if (denom <= 0.0) throw std::runtime_error("estimate_rt60: degenerate fit");
  double slope = (static_cast<double>(count) * sxy - sx * sy) / denom;
  if (slope >= 0.0) throw std::runtime_error("estimate_rt60: non-decaying curve");
  return -60.0 / slope;
}

}  // namespace nsx

#endif  // NSX_ACOUSTICS_RIR_HPP_
