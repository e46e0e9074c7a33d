#pragma once

// Umbrella header for the whole simulator.

#include "analysis.hpp"
#include "components.hpp"
#include "config.hpp"
#include "engine.hpp"
#include "oracle.hpp"
#include "polarization.hpp"
#include "presets.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "run_config.hpp"
