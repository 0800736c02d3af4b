#pragma once

#include "poal/error.hpp"
#include "poal/data.hpp"
#include "poal/learner.hpp"
#include "poal/idscore.hpp"
#include "poal/acquisition.hpp"
#include "poal/pareto.hpp"
#include "poal/strategies.hpp"
#include "poal/config.hpp"
#include "poal/harness.hpp"
