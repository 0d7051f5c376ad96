#pragma once
// Umbrella header.

#include "s2s/config.hpp"
#include "s2s/errors.hpp"
#include "s2s/grid_io.hpp"
#include "s2s/harness.hpp"
#include "s2s/image_io.hpp"
#include "s2s/inference.hpp"
#include "s2s/losses.hpp"
#include "s2s/metrics.hpp"
#include "s2s/network.hpp"
#include "s2s/patches.hpp"
#include "s2s/rng.hpp"
#include "s2s/sampling.hpp"
#include "s2s/st_data.hpp"
#include "s2s/synth.hpp"
#include "s2s/tape.hpp"
#include "s2s/tensor.hpp"
#include "s2s/training.hpp"
#include "s2s/workers.hpp"
