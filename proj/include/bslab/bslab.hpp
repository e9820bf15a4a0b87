#pragma once

#include "bslab/coeffs.hpp"
#include "bslab/error.hpp"
#include "bslab/experiment.hpp"
#include "bslab/expression.hpp"
#include "bslab/measure_io.hpp"
#include "bslab/measures.hpp"
#include "bslab/operator_io.hpp"
#include "bslab/operators.hpp"
#include "bslab/orlicz.hpp"
#include "bslab/scenarios.hpp"
#include "bslab/spectral.hpp"
#include "bslab/svg_plot.hpp"
