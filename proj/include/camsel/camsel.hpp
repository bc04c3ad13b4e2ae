#pragma once

// Everything except manifest.hpp, which pulls in OpenSSL.

#include "camsel/core_model.hpp"
#include "camsel/evalkit.hpp"
#include "camsel/forest.hpp"
#include "camsel/heatmap.hpp"
#include "camsel/pipeline.hpp"
#include "camsel/rng.hpp"
#include "camsel/rsf_impute.hpp"
#include "camsel/synthgen.hpp"
#include "camsel/version.hpp"
