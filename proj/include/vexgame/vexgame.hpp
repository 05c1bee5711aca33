#pragma once

#include "config.hpp"
#include "envelope.hpp"
#include "game.hpp"
#include "martingale.hpp"
#include "rng.hpp"
#include "runner.hpp"
#include "simplex.hpp"
#include "strategy.hpp"
#include "value.hpp"
