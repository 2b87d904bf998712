#pragma once

#include "errors.hpp"
#include "matcore.hpp"
#include "rng.hpp"
#include "qobjects.hpp"
#include "povmlib.hpp"
#include "simkit.hpp"
#include "admm.hpp"
#include "solvers.hpp"
#include "eprec.hpp"
#include "qptsets.hpp"
#include "parallel.hpp"
#include "bench.hpp"
#include "io.hpp"
