#pragma once

#include "mrv/circular.hpp"
#include "mrv/error.hpp"
#include "mrv/geometry.hpp"
#include "mrv/io.hpp"
#include "mrv/nnts.hpp"
#include "mrv/parallel.hpp"
#include "mrv/pipeline.hpp"
#include "mrv/random.hpp"
#include "mrv/scan.hpp"
#include "mrv/sim.hpp"
#include "mrv/tail.hpp"
