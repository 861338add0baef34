#pragma once

#include "tneda/bit_string.hpp"
#include "tneda/chain_bayes.hpp"
#include "tneda/diagnostics.hpp"
#include "tneda/distribution.hpp"
#include "tneda/eda.hpp"
#include "tneda/error.hpp"
#include "tneda/mps.hpp"
#include "tneda/ordering.hpp"
#include "tneda/problems.hpp"
#include "tneda/rng.hpp"
#include "tneda/selection.hpp"
#include "tneda/training.hpp"
