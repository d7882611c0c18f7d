/*
 *  Copyright 2026 The GapLab Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */


#pragma once

#include <vector>

#include "gaplab/lm/lstm_lm.hpp"

namespace gaplab::lm::detail {

/// Activations kept from one layer's forward pass over a window.
template <typename S>
struct LayerCache {
  MatT<S> input;   // in x TB, after dropout
  MatT<S> mask;    // dropout mask (scaled), empty without dropout
  MatT<S> gates;   // 4H x TB, after the nonlinearities
  MatT<S> c;       // H x TB
  MatT<S> tanh_c;  // H x TB
  MatT<S> h;       // H x TB
  MatT<S> h0, c0;  // H x B, state entering the window
};

}  // namespace gaplab::lm::detail
