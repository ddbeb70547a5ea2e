#pragma once

#include "tailext/core.hpp"
#include "tailext/curation.hpp"
#include "tailext/error.hpp"
#include "tailext/experiments.hpp"
#include "tailext/io.hpp"
#include "tailext/losses.hpp"
#include "tailext/metrics.hpp"
#include "tailext/model.hpp"
#include "tailext/parallel.hpp"
#include "tailext/rng.hpp"
#include "tailext/sampling.hpp"
#include "tailext/splits.hpp"
#include "tailext/synth.hpp"
