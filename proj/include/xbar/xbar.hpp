#pragma once

#include "xbar/config.hpp"
#include "xbar/device.hpp"
#include "xbar/experiment.hpp"
#include "xbar/io.hpp"
#include "xbar/matrix.hpp"
#include "xbar/mvm.hpp"
#include "xbar/optimizer.hpp"
#include "xbar/pulsed_update.hpp"
#include "xbar/rng.hpp"
#include "xbar/run.hpp"
#include "xbar/version.hpp"
