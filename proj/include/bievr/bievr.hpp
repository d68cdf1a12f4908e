// Copyright 2026 BIEVR-LIO Authors
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

#include "bievr/benchmark.hpp"
#include "bievr/bump_image.hpp"
#include "bievr/io.hpp"
#include "bievr/lie.hpp"
#include "bievr/metrics.hpp"
#include "bievr/morton.hpp"
#include "bievr/oracles.hpp"
#include "bievr/pipeline.hpp"
#include "bievr/preintegration.hpp"
#include "bievr/registration.hpp"
#include "bievr/sampling.hpp"
#include "bievr/scene.hpp"
#include "bievr/simulator.hpp"
#include "bievr/sliding_window.hpp"
#include "bievr/trajectory.hpp"
#include "bievr/types.hpp"
#include "bievr/voxel.hpp"
#include "bievr/voxel_map.hpp"
