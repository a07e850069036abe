#pragma once

// Umbrella header: spatial-temporal re-ranking for cross-camera identity
// retrieval. Fuses precomputed visual-feature similarity with transition-time
// probabilities estimated by histogram binning plus Parzen smoothing, scored
// through a logistic-smoothed joint metric, evaluated with CMC/mAP.

#include "stfuse/errors.hpp"
#include "stfuse/evaluation.hpp"
#include "stfuse/fusion.hpp"
#include "stfuse/io.hpp"
#include "stfuse/report.hpp"
#include "stfuse/simulator.hpp"
#include "stfuse/st_model.hpp"
#include "stfuse/types.hpp"
#include "stfuse/visual.hpp"
