#pragma once

#include "nupbr/core.hpp"
#include "nupbr/measure.hpp"
#include "nupbr/characteristics.hpp"
#include "nupbr/simplex.hpp"
#include "nupbr/cones.hpp"
#include "nupbr/lattice.hpp"
#include "nupbr/numeraire.hpp"
#include "nupbr/profit_oracle.hpp"
#include "nupbr/deflator.hpp"
#include "nupbr/io.hpp"
#include "nupbr/pipeline.hpp"
