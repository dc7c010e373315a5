#pragma once

#include "stitch/binary_io.hpp"
#include "stitch/config.hpp"
#include "stitch/dsp.hpp"
#include "stitch/error.hpp"
#include "stitch/eval.hpp"
#include "stitch/generator.hpp"
#include "stitch/image.hpp"
#include "stitch/iqf32.hpp"
#include "stitch/nn_layers.hpp"
#include "stitch/rng.hpp"
#include "stitch/segnet.hpp"
#include "stitch/signal_bank.hpp"
#include "stitch/waveform.hpp"
#include "stitch/wideband.hpp"
