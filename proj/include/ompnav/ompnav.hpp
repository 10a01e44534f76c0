#pragma once
// Everything.

#include "ompnav/controller.hpp"
#include "ompnav/core.hpp"
#include "ompnav/dataset.hpp"
#include "ompnav/dynamics.hpp"
#include "ompnav/environment.hpp"
#include "ompnav/episode.hpp"
#include "ompnav/experiment.hpp"
#include "ompnav/grid_io.hpp"
#include "ompnav/gridmap.hpp"
#include "ompnav/planner.hpp"
#include "ompnav/plots.hpp"
#include "ompnav/predictor.hpp"
#include "ompnav/scenario.hpp"
#include "ompnav/sensorsim.hpp"
#include "ompnav/smooth_path.hpp"
#include "ompnav/timing.hpp"
#include "ompnav/trajectory.hpp"
#include "ompnav/trajopt.hpp"
#include "ompnav/tvlqr.hpp"
#include "ompnav/unet.hpp"
