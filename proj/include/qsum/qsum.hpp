#pragma once

#include "qsum/bench.hpp"
#include "qsum/errors.hpp"
#include "qsum/problem.hpp"
#include "qsum/problems.hpp"
#include "qsum/projections.hpp"
#include "qsum/rng.hpp"
#include "qsum/solvers.hpp"
#include "qsum/stepsize.hpp"
#include "qsum/types.hpp"
