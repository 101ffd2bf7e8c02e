#pragma once

// Latent feature log-linear models for dyadic prediction.

#include "lfl/cluster.hpp"
#include "lfl/dataset.hpp"
#include "lfl/error.hpp"
#include "lfl/label_space.hpp"
#include "lfl/matrix.hpp"
#include "lfl/metrics.hpp"
#include "lfl/model.hpp"
#include "lfl/objective.hpp"
#include "lfl/serialization.hpp"
#include "lfl/synthetic.hpp"
#include "lfl/training.hpp"
