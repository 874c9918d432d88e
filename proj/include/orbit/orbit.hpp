#pragma once

#include "orbit/catalog.hpp"
#include "orbit/config.hpp"
#include "orbit/csv.hpp"
#include "orbit/errors.hpp"
#include "orbit/fit.hpp"
#include "orbit/flag.hpp"
#include "orbit/lie.hpp"
#include "orbit/observation.hpp"
#include "orbit/oracle.hpp"
#include "orbit/poe.hpp"
#include "orbit/pooling.hpp"
#include "orbit/predictive.hpp"
#include "orbit/rng.hpp"
#include "orbit/runner.hpp"
#include "orbit/stream.hpp"
#include "orbit/tracker.hpp"
