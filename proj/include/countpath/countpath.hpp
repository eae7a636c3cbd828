// Copyright 2026 The CountPath Authors.
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

// Umbrella header. The HTTP layer (http_routes.hpp) is not included.

#pragma once

#include "countpath/agreement.hpp"
#include "countpath/detection_io.hpp"
#include "countpath/errors.hpp"
#include "countpath/geometry.hpp"
#include "countpath/image.hpp"
#include "countpath/metrics.hpp"
#include "countpath/pipeline.hpp"
#include "countpath/qc.hpp"
#include "countpath/run_record.hpp"
#include "countpath/service.hpp"
#include "countpath/slide_store.hpp"
#include "countpath/synthgen.hpp"
#include "countpath/tables.hpp"
