// Copyright 2026 The NHR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nhr/ops.hpp"

#include <algorithm>

namespace nhr {

double bce_loss(double pred, int label) {
  const double p = std::clamp(pred, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  return label != 0 ? -std::log(p) : -std::log(1.0 - p);
}

void AdamConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("adam: learning rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ConfigError("adam: betas must lie in [0, 1)");
  if (!(eps > 0)) throw ConfigError("adam: eps must be positive");
}

}  // namespace nhr
