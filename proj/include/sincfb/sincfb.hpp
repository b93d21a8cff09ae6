#pragma once

#include "analysis.hpp"
#include "autodiff.hpp"
#include "checkpoint.hpp"
#include "csv.hpp"
#include "errors.hpp"
#include "filter_core.hpp"
#include "init_strategies.hpp"
#include "matrix.hpp"
#include "optimizer.hpp"
#include "pipeline.hpp"
#include "si_snr.hpp"
#include "synth.hpp"
#include "trainer.hpp"
#include "wav.hpp"
