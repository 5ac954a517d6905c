#pragma once

#include "overparam/bounds.hpp"
#include "overparam/config.hpp"
#include "overparam/constructor.hpp"
#include "overparam/core_net.hpp"
#include "overparam/descent.hpp"
#include "overparam/experiments.hpp"
#include "overparam/lower_bound.hpp"
#include "overparam/risk_grad.hpp"
#include "overparam/rng.hpp"
