#pragma once

// Umbrella header.

#include "ppcoad/config.hpp"
#include "ppcoad/conformal.hpp"
#include "ppcoad/core.hpp"
#include "ppcoad/data.hpp"
#include "ppcoad/fdr.hpp"
#include "ppcoad/harness.hpp"
#include "ppcoad/kmeans.hpp"
#include "ppcoad/metrics.hpp"
#include "ppcoad/oran.hpp"
#include "ppcoad/random.hpp"
#include "ppcoad/scoring.hpp"
#include "ppcoad/twin.hpp"
