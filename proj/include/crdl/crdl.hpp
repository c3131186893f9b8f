#pragma once

// Umbrella header for the crdl probabilistic description-logic engine.

#include "crdl/types.hpp"
#include "crdl/expr.hpp"
#include "crdl/terminology.hpp"
#include "crdl/parser.hpp"
#include "crdl/tnetwork.hpp"
#include "crdl/validate.hpp"
#include "crdl/grounding.hpp"
#include "crdl/prune.hpp"
#include "crdl/factor.hpp"
#include "crdl/exact.hpp"
#include "crdl/shatter.hpp"
#include "crdl/aggregate.hpp"
#include "crdl/lbp.hpp"
#include "crdl/cluster.hpp"
#include "crdl/credal.hpp"
#include "crdl/generate.hpp"
