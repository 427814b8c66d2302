#pragma once

#include "mfagl/aggl.hpp"
#include "mfagl/baselines.hpp"
#include "mfagl/checkpoint.hpp"
#include "mfagl/config.hpp"
#include "mfagl/csv.hpp"
#include "mfagl/date.hpp"
#include "mfagl/error.hpp"
#include "mfagl/geofeatures.hpp"
#include "mfagl/harness.hpp"
#include "mfagl/netcore.hpp"
#include "mfagl/panel_io.hpp"
#include "mfagl/pipeline.hpp"
#include "mfagl/regions.hpp"
#include "mfagl/rng.hpp"
#include "mfagl/synth.hpp"
