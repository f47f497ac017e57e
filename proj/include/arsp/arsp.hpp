#pragma once

#include "arsp/core.hpp"
#include "arsp/config.hpp"
#include "arsp/waveform.hpp"
#include "arsp/scene.hpp"
#include "arsp/rsp.hpp"
#include "arsp/clean.hpp"
#include "arsp/doppler.hpp"
#include "arsp/fxp.hpp"
#include "arsp/adaptive.hpp"
#include "arsp/isac.hpp"
#include "arsp/io.hpp"
#include "arsp/experiments.hpp"
