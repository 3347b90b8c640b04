#pragma once

// Umbrella header.

#include "turbobw/baum_welch.hpp"
#include "turbobw/bcjr.hpp"
#include "turbobw/channel.hpp"
#include "turbobw/comm_chain.hpp"
#include "turbobw/experiment.hpp"
#include "turbobw/logdomain.hpp"
#include "turbobw/params.hpp"
#include "turbobw/rng.hpp"
#include "turbobw/table.hpp"
#include "turbobw/trellis.hpp"
#include "turbobw/turbo_receiver.hpp"
