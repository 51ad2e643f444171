#pragma once

#include "betabart/cumulants.hpp"
#include "betabart/error.hpp"
#include "betabart/fit.hpp"
#include "betabart/link.hpp"
#include "betabart/lrtest.hpp"
#include "betabart/model.hpp"
#include "betabart/parallel.hpp"
#include "betabart/rng.hpp"
#include "betabart/simulate.hpp"
#include "betabart/specfun.hpp"
#include "betabart/tensor.hpp"

namespace betabart {

inline constexpr const char* kVersion = "1.0.0";

} // namespace betabart
