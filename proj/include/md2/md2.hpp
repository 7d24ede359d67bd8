#pragma once

// Everything except the HTTP layer (include md2/http_api.hpp for that).
#include "md2/engine.hpp"
#include "md2/eval.hpp"
#include "md2/features.hpp"
#include "md2/labeling.hpp"
#include "md2/labels.hpp"
#include "md2/level.hpp"
#include "md2/lstm.hpp"
#include "md2/persona.hpp"
#include "md2/pipeline.hpp"
#include "md2/session.hpp"
#include "md2/state.hpp"
#include "md2/svm.hpp"
#include "md2/trace.hpp"
#include "md2/types.hpp"
