#pragma once

#include "qrisk/aggregation.hpp"
#include "qrisk/commands.hpp"
#include "qrisk/convex_kit.hpp"
#include "qrisk/duality_engine.hpp"
#include "qrisk/extended.hpp"
#include "qrisk/instance.hpp"
#include "qrisk/lp_solver.hpp"
#include "qrisk/prob_core.hpp"
#include "qrisk/report.hpp"
#include "qrisk/risk_measures.hpp"
