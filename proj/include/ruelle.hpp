#pragma once

#include "ruelle/analysis.hpp"
#include "ruelle/configuration.hpp"
#include "ruelle/error.hpp"
#include "ruelle/io.hpp"
#include "ruelle/kernels.hpp"
#include "ruelle/potentials.hpp"
#include "ruelle/run.hpp"
#include "ruelle/state_space.hpp"
#include "ruelle/transfer.hpp"
#include "ruelle/zeta.hpp"
