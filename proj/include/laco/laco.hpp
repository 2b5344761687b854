#pragma once

#include "laco/config.hpp"
#include "laco/cost_model.hpp"
#include "laco/encoder.hpp"
#include "laco/error.hpp"
#include "laco/experiments.hpp"
#include "laco/gradcheck.hpp"
#include "laco/pml.hpp"
#include "laco/report_io.hpp"
#include "laco/runner.hpp"
#include "laco/tensor.hpp"
#include "laco/token_grid.hpp"
