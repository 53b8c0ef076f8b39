#pragma once

#include "lgc/errors.hpp"
#include "lgc/rng.hpp"
#include "lgc/var_model.hpp"
#include "lgc/regression.hpp"
#include "lgc/gc.hpp"
#include "lgc/theory.hpp"
#include "lgc/experiments.hpp"
#include "lgc/io.hpp"
