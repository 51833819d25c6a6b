#pragma once

#include "fosr/csv.hpp"
#include "fosr/dataset.hpp"
#include "fosr/draw_archive.hpp"
#include "fosr/dss.hpp"
#include "fosr/errors.hpp"
#include "fosr/gaussian_samplers.hpp"
#include "fosr/gibbs.hpp"
#include "fosr/loadings.hpp"
#include "fosr/manifest.hpp"
#include "fosr/mcmc_config.hpp"
#include "fosr/rng.hpp"
#include "fosr/shrinkage.hpp"
#include "fosr/simulation.hpp"
#include "fosr/spline_basis.hpp"
#include "fosr/stats.hpp"
#include "fosr/study.hpp"
#include "fosr/summaries.hpp"
#include "fosr/version.hpp"
