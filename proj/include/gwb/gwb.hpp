#pragma once

#include "config.hpp"
#include "core.hpp"
#include "diagnostics.hpp"
#include "dichotomy.hpp"
#include "io.hpp"
#include "lattice.hpp"
#include "localization.hpp"
#include "pipeline.hpp"
#include "spectral.hpp"
#include "xhat.hpp"
