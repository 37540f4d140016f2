// Copyright 2026 The crossplace Authors
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

#pragma once

#include "crossplace/benchmark.hpp"
#include "crossplace/config.hpp"
#include "crossplace/dataset_io.hpp"
#include "crossplace/depth_completion.hpp"
#include "crossplace/encoder.hpp"
#include "crossplace/error.hpp"
#include "crossplace/features.hpp"
#include "crossplace/geometry.hpp"
#include "crossplace/image_io.hpp"
#include "crossplace/nmf.hpp"
#include "crossplace/pipeline.hpp"
#include "crossplace/pose.hpp"
#include "crossplace/retrieval.hpp"
#include "crossplace/synthetic.hpp"
#include "crossplace/training.hpp"
#include "crossplace/vlad.hpp"
