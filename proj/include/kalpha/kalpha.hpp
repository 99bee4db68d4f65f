#pragma once

#include "kalpha/anova.hpp"
#include "kalpha/data.hpp"
#include "kalpha/distance.hpp"
#include "kalpha/error.hpp"
#include "kalpha/estimators.hpp"
#include "kalpha/intervals.hpp"
#include "kalpha/parallel.hpp"
#include "kalpha/rng.hpp"
#include "kalpha/simulation.hpp"
