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

#ifndef NSX_SIGNAL_METRICS_HPP_
#define NSX_SIGNAL_METRICS_HPP_

#include <cmath>
#include <stdexcept>
#include <vector>

namespace nsx {

constexpr double kSiSdrClampDb = 60.0;

// Scale-invariant SDR in dB, clamped to [-60, 60].
//   alpha = <est, ref> / <ref, ref>
//   10 log10(|alpha ref|^2 / |est - alpha ref|^2)
inline double si_sdr(const std::vector<float>& estimate, const std::vector<float>& reference) {
  if (estimate.size() != reference.size())
    throw std::invalid_argument("si_sdr: length mismatch");
  double dot = 0.0, ref_energy = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    dot += static_cast<double>(estimate[i]) * reference[i];
    ref_energy += static_cast<double>(reference[i]) * reference[i];
  }
  if (ref_energy <= 0.0) throw std::invalid_argument("si_sdr: zero-energy reference");
  double alpha = dot / ref_energy;
  double target_energy = alpha * alpha * ref_energy;
  double noise_energy = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    double n = estimate[i] - alpha * reference[i];
    noise_energy += n * n;
  }
  if (target_energy <= 0.0) return -kSiSdrClampDb;
  if (noise_energy <= 0.0) return kSiSdrClampDb;
  double v = 10.0 * std::log10(target_energy / noise_energy);
  if (v > kSiSdrClampDb) return kSiSdrClampDb;
  if (v < -kSiSdrClampDb) return -kSiSdrClampDb;
  return v;
}

// SI-SDR gain of the estimate over the unprocessed mixture.
inline double si_sdr_improvement(const std::vector<float>& estimate,
                                 const std::vector<float>& mixture,
                                 const std::vector<float>& reference) {
  return si_sdr(estimate, reference) - si_sdr(mixture, reference);
}

inline double rms_db(const std::vector<float>& wave) {
  double e = 0.0;
  for (float s : wave) e += static_cast<double>(s) * s;
  if (e <= 0.0 || wave.empty()) throw std::invalid_argument("rms_db: zero-energy input");
  return 10.0 * std::log10(e / static_cast<double>(wave.size()));
}

}  // namespace nsx

#endif  // NSX_SIGNAL_METRICS_HPP_
