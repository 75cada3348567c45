#pragma once

// Everything except the live HTTP adapters (shapnarr/http_providers.hpp) and
// the command layer (shapnarr/cli.hpp), which pull in cpp-httplib.

#include "shapnarr/errors.hpp"
#include "shapnarr/numfmt.hpp"
#include "shapnarr/core_model.hpp"
#include "shapnarr/prompt_forge.hpp"
#include "shapnarr/llm_gateway.hpp"
#include "shapnarr/pyliteral.hpp"
#include "shapnarr/evaluator.hpp"
#include "shapnarr/critic.hpp"
#include "shapnarr/coherence.hpp"
#include "shapnarr/ensemble.hpp"
#include "shapnarr/metrics.hpp"
#include "shapnarr/simlab.hpp"
#include "shapnarr/orchestrator.hpp"
