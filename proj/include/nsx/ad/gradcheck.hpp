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

#ifndef NSX_AD_GRADCHECK_HPP_
#define NSX_AD_GRADCHECK_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "nsx/ad/graph.hpp"

namespace nsx {
namespace ad {

struct GradCheckEntry {
  int param = -1;
  int64_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_err = 0;
};

// Central finite differences against the tape gradient on selected
// parameter coordinates. build must assemble forward + loss from the
// current store values and return the loss node.
template <typename S>
std::vector<GradCheckEntry> gradcheck(
    ParamStore<S>& ps, const std::function<int(Graph<S>&, ParamStore<S>&)>& build,
    const std::vector<std::pair<int, int64_t>>& coords, S step) {
  ps.zero_grad();
  {
    Graph<S> g;
    int loss = build(g, ps);
    g.backward(loss);
  }

  std::vector<GradCheckEntry> out;
  for (auto [pi, idx] : coords) {
    Param<S>& p = ps.at(pi);
    S saved = p.value[idx];
    p.value[idx] = saved + step;
    double up, down;
    {
      Graph<S> g;
      up = static_cast<double>(g.val(build(g, ps))[0]);
    }
    p.value[idx] = saved - step;
    {
      Graph<S> g;
      down = static_cast<double>(g.val(build(g, ps))[0]);
    }
    p.value[idx] = saved;

    GradCheckEntry e;
    e.param = pi;
    e.index = idx;
    e.analytic = static_cast<double>(p.grad[idx]);
    e.numeric = (up - down) / (2.0 * static_cast<double>(step));
    double denom = std::max(std::abs(e.analytic) + std::abs(e.numeric), 1e-8);
    e.rel_err = std::abs(e.analytic - e.numeric) / denom;
    out.push_back(e);
  }
  return out;
}

}  // namespace ad
}  // namespace nsx

#endif  // NSX_AD_GRADCHECK_HPP_
