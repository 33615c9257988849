/**
 * Copyright 2026 The hugnn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "hugnn/adam.hpp"
#include "hugnn/baseline.hpp"
#include "hugnn/bundle_io.hpp"
#include "hugnn/checkpoint.hpp"
#include "hugnn/contraction.hpp"
#include "hugnn/error.hpp"
#include "hugnn/gradcheck.hpp"
#include "hugnn/graph.hpp"
#include "hugnn/graph_ops.hpp"
#include "hugnn/heterophily_experiment.hpp"
#include "hugnn/homophily.hpp"
#include "hugnn/losses.hpp"
#include "hugnn/metrics.hpp"
#include "hugnn/model.hpp"
#include "hugnn/ops.hpp"
#include "hugnn/params.hpp"
#include "hugnn/perturb.hpp"
#include "hugnn/rng.hpp"
#include "hugnn/state_json.hpp"
#include "hugnn/synth.hpp"
#include "hugnn/tape.hpp"
#include "hugnn/tensor.hpp"
#include "hugnn/train.hpp"
