#pragma once

#include "causalab/dataset.hpp"
#include "causalab/demos.hpp"
#include "causalab/error.hpp"
#include "causalab/estimators.hpp"
#include "causalab/experiments.hpp"
#include "causalab/io.hpp"
#include "causalab/irm.hpp"
#include "causalab/numerics.hpp"
#include "causalab/rng.hpp"
#include "causalab/scm.hpp"
#include "causalab/types.hpp"
#include "causalab/validate.hpp"
