// Copyright 2026 The procal-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "procal/calibration.hpp"
#include "procal/circuit.hpp"
#include "procal/correlator.hpp"
#include "procal/error.hpp"
#include "procal/hal.hpp"
#include "procal/instruments.hpp"
#include "procal/pipeline.hpp"
#include "procal/presets.hpp"
#include "procal/range_planner.hpp"
#include "procal/setup_file.hpp"
#include "procal/sweep.hpp"
#include "procal/text_config.hpp"
#include "procal/units.hpp"
