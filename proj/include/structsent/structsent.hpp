#pragma once

// Umbrella header pulling in the whole library.

#include "structsent/config.hpp"
#include "structsent/corpus.hpp"
#include "structsent/decoder.hpp"
#include "structsent/error.hpp"
#include "structsent/fusion.hpp"
#include "structsent/gcn.hpp"
#include "structsent/metrics.hpp"
#include "structsent/model.hpp"
#include "structsent/rng.hpp"
#include "structsent/tensor.hpp"
#include "structsent/trainer.hpp"
#include "structsent/transfer.hpp"
