#pragma once

// Domain types and feature handling
#include "tlforecast/types.hpp"
#include "tlforecast/scenario.hpp"
#include "tlforecast/scaler.hpp"
#include "tlforecast/context.hpp"

// Synthetic intersection data
#include "tlforecast/signal.hpp"
#include "tlforecast/driver.hpp"
#include "tlforecast/simulate.hpp"
#include "tlforecast/smoothing.hpp"
#include "tlforecast/corpus.hpp"

// Policy models
#include "tlforecast/network.hpp"
#include "tlforecast/loss.hpp"
#include "tlforecast/dataset.hpp"
#include "tlforecast/train.hpp"
#include "tlforecast/weights_io.hpp"

// Forecasting
#include "tlforecast/kinematics.hpp"
#include "tlforecast/forecast.hpp"
#include "tlforecast/kde.hpp"

// Evaluation
#include "tlforecast/metrics.hpp"
#include "tlforecast/ablation.hpp"
