// Copyright 2026 The Anytime EENN Authors.
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

#ifndef ANYTIME_ANYTIME_HPP
#define ANYTIME_ANYTIME_HPP

#include "anytime/activations.hpp"
#include "anytime/anytime_sim.hpp"
#include "anytime/conformal.hpp"
#include "anytime/error.hpp"
#include "anytime/intervals.hpp"
#include "anytime/logit_store.hpp"
#include "anytime/metrics.hpp"
#include "anytime/report.hpp"
#include "anytime/threshold_model.hpp"
#include "anytime/toy_eenn.hpp"
#include "anytime/trajectory.hpp"
#include "anytime/transform_spec.hpp"
#include "anytime/transforms.hpp"

#endif // ANYTIME_ANYTIME_HPP
