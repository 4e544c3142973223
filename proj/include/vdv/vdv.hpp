// Copyright 2026 The VDV Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header for the toolkit.

#pragma once

#include "vdv/baselines.hpp"
#include "vdv/dataset.hpp"
#include "vdv/ensemble.hpp"
#include "vdv/kernel.hpp"
#include "vdv/metrics.hpp"
#include "vdv/pca.hpp"
#include "vdv/svm.hpp"
