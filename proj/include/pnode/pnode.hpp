#pragma once

#include "pnode/bayes_quad.hpp"
#include "pnode/errors.hpp"
#include "pnode/gauss_filter.hpp"
#include "pnode/measurements.hpp"
#include "pnode/perturb_sampler.hpp"
#include "pnode/problems.hpp"
#include "pnode/random.hpp"
#include "pnode/state_model.hpp"
#include "pnode/trajectory.hpp"
