#pragma once

#include "meegnet/common.hpp"
#include "meegnet/rng.hpp"
#include "meegnet/tensor.hpp"
#include "meegnet/fft.hpp"
#include "meegnet/layers.hpp"
#include "meegnet/losses.hpp"
#include "meegnet/model.hpp"
#include "meegnet/checkpoint.hpp"
#include "meegnet/gradcheck.hpp"
#include "meegnet/metrics.hpp"
#include "meegnet/stats.hpp"
#include "meegnet/data.hpp"
#include "meegnet/synth.hpp"
#include "meegnet/splits.hpp"
#include "meegnet/train.hpp"
#include "meegnet/report.hpp"
