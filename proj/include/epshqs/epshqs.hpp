#pragma once

#include "errors.hpp"
#include "random.hpp"
#include "design_space.hpp"
#include "neural.hpp"
#include "oracle.hpp"
#include "strategies.hpp"
#include "metrics.hpp"
#include "al_loop.hpp"
#include "config.hpp"
#include "experiment.hpp"
