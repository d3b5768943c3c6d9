#pragma once

// Radar-camera metric depth fusion: global alignment of scaleless monocular
// predictions against sparse radar depth, quasi-dense scale estimation from
// per-point confidence maps, local scale refinement, evaluation metrics, and
// a synthetic data harness.

#include "rcdepth/align.hpp"
#include "rcdepth/delaunay.hpp"
#include "rcdepth/geometry.hpp"
#include "rcdepth/harness.hpp"
#include "rcdepth/interpolate.hpp"
#include "rcdepth/io/config_io.hpp"
#include "rcdepth/io/image_io.hpp"
#include "rcdepth/io/text_io.hpp"
#include "rcdepth/map_ops.hpp"
#include "rcdepth/metrics.hpp"
#include "rcdepth/pipeline.hpp"
#include "rcdepth/quasidense.hpp"
#include "rcdepth/refine.hpp"
#include "rcdepth/rng.hpp"
#include "rcdepth/synth.hpp"
#include "rcdepth/types.hpp"
