#pragma once

#include "ergodiag/coupling.hpp"
#include "ergodiag/diagnostics.hpp"
#include "ergodiag/distances.hpp"
#include "ergodiag/distribution.hpp"
#include "ergodiag/kernel.hpp"
#include "ergodiag/models.hpp"
#include "ergodiag/report.hpp"
#include "ergodiag/rng.hpp"
#include "ergodiag/stability.hpp"
#include "ergodiag/state.hpp"
#include "ergodiag/test_functions.hpp"
#include "ergodiag/transport.hpp"
