#pragma once

// Umbrella header for the deposition-image surrogate library: a small
// CNN/MLP engine with exact backpropagation, a Gaussian-plume synthetic data
// pipeline, the three-stage prediction model, and its evaluation suite.

#include "abm/adam.hpp"
#include "abm/chart.hpp"
#include "abm/colormap.hpp"
#include "abm/config.hpp"
#include "abm/dataset.hpp"
#include "abm/engine.hpp"
#include "abm/gradcheck.hpp"
#include "abm/image.hpp"
#include "abm/lhs.hpp"
#include "abm/loss.hpp"
#include "abm/metrics.hpp"
#include "abm/models.hpp"
#include "abm/network.hpp"
#include "abm/parallel.hpp"
#include "abm/plume.hpp"
#include "abm/report.hpp"
#include "abm/rng.hpp"
#include "abm/scenario.hpp"
#include "abm/tensor.hpp"
#include "abm/train.hpp"
#include "abm/weights.hpp"
