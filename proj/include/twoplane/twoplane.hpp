#pragma once

// Everything numerical. report.hpp and experiment.hpp are separate because
// they pull in OpenSSL for the content hashes.

#include "competitor.hpp"
#include "error.hpp"
#include "geom4.hpp"
#include "graphsurf.hpp"
#include "meshset.hpp"
#include "minsolve.hpp"
#include "parallel.hpp"
#include "perturb.hpp"
#include "stoptime.hpp"
