#pragma once

#include "daks/adversary.hpp"
#include "daks/experiment.hpp"
#include "daks/io.hpp"
#include "daks/knowledge.hpp"
#include "daks/metrics.hpp"
#include "daks/protocol.hpp"
#include "daks/rng.hpp"
#include "daks/simulator.hpp"
#include "daks/types.hpp"
