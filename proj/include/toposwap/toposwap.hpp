#pragma once

// Convenience umbrella for the whole library.

#include "toposwap/acyclicity.hpp"
#include "toposwap/cli.hpp"
#include "toposwap/datagen.hpp"
#include "toposwap/errors.hpp"
#include "toposwap/graph.hpp"
#include "toposwap/io.hpp"
#include "toposwap/models.hpp"
#include "toposwap/rng.hpp"
#include "toposwap/scores.hpp"
#include "toposwap/search.hpp"
#include "toposwap/solver.hpp"
