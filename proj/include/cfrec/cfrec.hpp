#pragma once

// Umbrella header for the cfrec recommendation engine.

#include "cfrec/anonymize.hpp"
#include "cfrec/errors.hpp"
#include "cfrec/evaluation.hpp"
#include "cfrec/event.hpp"
#include "cfrec/feature_space.hpp"
#include "cfrec/knn.hpp"
#include "cfrec/recommender.hpp"
#include "cfrec/record_store.hpp"
#include "cfrec/synthetic.hpp"
#include "cfrec/time_utils.hpp"
#include "cfrec/weight_optimizer.hpp"
