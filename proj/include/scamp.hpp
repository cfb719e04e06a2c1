#pragma once

#include "scamp/amp.hpp"
#include "scamp/base_matrix.hpp"
#include "scamp/baselines.hpp"
#include "scamp/denoise.hpp"
#include "scamp/design.hpp"
#include "scamp/errors.hpp"
#include "scamp/experiment.hpp"
#include "scamp/io.hpp"
#include "scamp/matrix_amp.hpp"
#include "scamp/metrics.hpp"
#include "scamp/model.hpp"
#include "scamp/potential.hpp"
#include "scamp/quadrature.hpp"
#include "scamp/rng.hpp"
#include "scamp/spd.hpp"
#include "scamp/state_evolution.hpp"
#include "scamp/types.hpp"
