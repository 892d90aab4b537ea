#pragma once

#include "nullconvex/core.hpp"
#include "nullconvex/jet.hpp"
#include "nullconvex/expression.hpp"
#include "nullconvex/metric.hpp"
#include "nullconvex/curvature.hpp"
#include "nullconvex/ode.hpp"
#include "nullconvex/quadrature.hpp"
#include "nullconvex/seed.hpp"
#include "nullconvex/ray.hpp"
#include "nullconvex/parallel.hpp"
#include "nullconvex/congruence.hpp"
#include "nullconvex/entropy.hpp"
#include "nullconvex/energy.hpp"
#include "nullconvex/scenario.hpp"
