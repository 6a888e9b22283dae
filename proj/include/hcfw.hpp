#pragma once

#include "hcfw/core.hpp"
#include "hcfw/engine.hpp"
#include "hcfw/error.hpp"
#include "hcfw/evaluation.hpp"
#include "hcfw/fine_grained.hpp"
#include "hcfw/hash_functions.hpp"
#include "hcfw/high_level.hpp"
#include "hcfw/io.hpp"
#include "hcfw/kernel_map.hpp"
#include "hcfw/pipeline.hpp"
#include "hcfw/random.hpp"
#include "hcfw/scenarios.hpp"
#include "hcfw/supervision.hpp"
