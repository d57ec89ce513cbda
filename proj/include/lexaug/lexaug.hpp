/*
 * Copyright 2026 The lexaug Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Everything except the live HTTP transport (lexaug/defs_http.hpp).

#include "lexaug/baselines.hpp"
#include "lexaug/checkpoint.hpp"
#include "lexaug/common.hpp"
#include "lexaug/config.hpp"
#include "lexaug/defs.hpp"
#include "lexaug/embed.hpp"
#include "lexaug/eval.hpp"
#include "lexaug/lexicon.hpp"
#include "lexaug/nn.hpp"
#include "lexaug/pipeline.hpp"
#include "lexaug/predict.hpp"
#include "lexaug/tensor.hpp"
#include "lexaug/tokenize.hpp"
#include "lexaug/train.hpp"
#include "lexaug/transformer.hpp"
