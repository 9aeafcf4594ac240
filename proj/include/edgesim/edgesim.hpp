#pragma once

#include "edgesim/domain.hpp"
#include "edgesim/engine.hpp"
#include "edgesim/harness.hpp"
#include "edgesim/io.hpp"
#include "edgesim/policy.hpp"
#include "edgesim/workload.hpp"
