/*
 * Copyright 2026 The FCM Workbench Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "fcm/agentic/loop.hpp"
#include "fcm/core/basins.hpp"
#include "fcm/core/dynamics.hpp"
#include "fcm/core/types.hpp"
#include "fcm/error.hpp"
#include "fcm/extraction/evidence.hpp"
#include "fcm/extraction/http_provider.hpp"
#include "fcm/extraction/llm.hpp"
#include "fcm/extraction/pipeline.hpp"
#include "fcm/extraction/templates.hpp"
#include "fcm/io/fcm_json.hpp"
#include "fcm/io/files.hpp"
#include "fcm/mixer/mixer.hpp"
#include "fcm/service/api.hpp"
#include "fcm/version.hpp"
