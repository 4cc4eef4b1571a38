#pragma once

#include "dyadic/cube.hpp"
#include "dyadic/grid_function.hpp"
#include "dyadic/io.hpp"
#include "dyadic/lab.hpp"
#include "dyadic/operators.hpp"
#include "dyadic/rng.hpp"
#include "dyadic/sparse.hpp"
#include "dyadic/weights.hpp"
