#pragma once

#include "draco/channel.hpp"
#include "draco/core/error.hpp"
#include "draco/core/rng.hpp"
#include "draco/core/vec.hpp"
#include "draco/events.hpp"
#include "draco/metrics.hpp"
#include "draco/problem.hpp"
#include "draco/protocol.hpp"
#include "draco/verify.hpp"
#include "draco/version.hpp"
