#pragma once

// Umbrella header for the whole library.

#include "conquer/baselines.hpp"
#include "conquer/checkpoint.hpp"
#include "conquer/depparse.hpp"
#include "conquer/environment.hpp"
#include "conquer/experiment.hpp"
#include "conquer/linear_model.hpp"
#include "conquer/rng.hpp"
#include "conquer/second_order_matrix.hpp"
#include "conquer/sparse_vec.hpp"
#include "conquer/text.hpp"
#include "conquer/trace.hpp"
