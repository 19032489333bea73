#pragma once

// Umbrella header: kernel Stein goodness-of-fit testing for directional
// distributions on the unit hypersphere, with exact samplers, classical
// baselines, and a simulation harness.

#include "dksd/baselines.hpp"
#include "dksd/bench.hpp"
#include "dksd/errors.hpp"
#include "dksd/gof.hpp"
#include "dksd/linalg.hpp"
#include "dksd/models.hpp"
#include "dksd/rng.hpp"
#include "dksd/samplers.hpp"
#include "dksd/sphere.hpp"
#include "dksd/stein.hpp"
