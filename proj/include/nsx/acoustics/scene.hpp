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

#ifndef NSX_ACOUSTICS_SCENE_HPP_
#define NSX_ACOUSTICS_SCENE_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nsx/core/rng.hpp"

namespace nsx {

using Vec3 = std::array<double, 3>;

inline double distance(const Vec3& a, const Vec3& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

enum class ReverbRegime { kNormal, kFaint };

inline const char* regime_name(ReverbRegime r) {
  return r == ReverbRegime::kNormal ? "normal" : "faint";
}
inline ReverbRegime regime_from_name(const std::string& s) {
  if (s == "normal") return ReverbRegime::kNormal;
  if (s == "faint") return ReverbRegime::kFaint;
  throw std::invalid_argument("unknown regime: " + s);
}

constexpr double kNearThresholdMeters = 1.5;
constexpr double kWallMarginMeters = 0.5;
constexpr double kMaxSourceHeightMeters = 1.8;
constexpr int kSourcesPerScene = 5;
constexpr int kNearPerScene = 2;

// Shoebox room with one microphone and five sources, two of them within
// the near threshold of the microphone.
struct RoomScene {
  Vec3 dims{};
  double rt60 = 0.0;
  Vec3 mic_pos{};
  std::vector<Vec3> source_positions;
  std::vector<bool> near_mask;
  uint64_t seed = 0;

  double source_distance(int k) const { return distance(source_positions.at(static_cast<size_t>(k)), mic_pos); }
};

namespace scene_detail {

constexpr int kMaxRejectionAttempts = 10000;

inline Vec3 sample_position(Rng& rng, const Vec3& dims) {
  double zmax = std::min(kMaxSourceHeightMeters, dims[2] - kWallMarginMeters);
  return {rng.uniform(kWallMarginMeters, dims[0] - kWallMarginMeters),
          rng.uniform(kWallMarginMeters, dims[1] - kWallMarginMeters),
          rng.uniform(kWallMarginMeters, zmax)};
}

}  // namespace scene_detail

// Draws a scene by rejection sampling: two sources inside the near
// threshold, three beyond it, all respecting wall and height margins.
inline RoomScene sample_room_scene(uint64_t rng_seed, ReverbRegime regime) {
  using namespace scene_detail;
  Rng rng(splitmix64(rng_seed ^ 0x5C3E4E5F6A7B8C9DULL));
  RoomScene scene;
  scene.seed = rng_seed;
  scene.dims = {rng.uniform(3.0, 7.0), rng.uniform(4.0, 8.0), rng.uniform(2.13, 3.0)};
  double rt_hi = regime == ReverbRegime::kNormal ? 0.5 : 0.2;
  scene.rt60 = rng.uniform(0.1, rt_hi);
  scene.mic_pos = sample_position(rng, scene.dims);

  int attempts = 0;
  for (int k = 0; k < kSourcesPerScene; ++k) {
    bool want_near = k < kNearPerScene;
    for (;;) {
      if (++attempts > kMaxRejectionAttempts)
        throw std::runtime_error("sample_room_scene: rejection sampling exhausted");
      Vec3 p = sample_position(rng, scene.dims);
      bool near = distance(p, scene.mic_pos) < kNearThresholdMeters;
      if (near == want_near) {
        scene.source_positions.push_back(p);
        scene.near_mask.push_back(near);
        break;
      }
    }
  }
  return scene;
}

}  // namespace nsx

#endif  // NSX_ACOUSTICS_SCENE_HPP_
