#pragma once

#include "hskip/cli.hpp"          // IWYU pragma: export
#include "hskip/core.hpp"         // IWYU pragma: export
#include "hskip/experiments.hpp"  // IWYU pragma: export
#include "hskip/oracle.hpp"       // IWYU pragma: export
#include "hskip/protocol.hpp"     // IWYU pragma: export
#include "hskip/rng.hpp"          // IWYU pragma: export
#include "hskip/simnet.hpp"       // IWYU pragma: export
