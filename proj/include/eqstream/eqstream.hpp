#pragma once

// Umbrella header: event model, file formats, simulators, feature network,
// and the event-quality similarity metric.

#include "eqstream/errors.hpp"
#include "eqstream/event_io.hpp"
#include "eqstream/events.hpp"
#include "eqstream/frames.hpp"
#include "eqstream/grid.hpp"
#include "eqstream/lfs.hpp"
#include "eqstream/metric_config.hpp"
#include "eqstream/net/config.hpp"
#include "eqstream/net/conv2d.hpp"
#include "eqstream/net/conv_lstm.hpp"
#include "eqstream/net/layer_norm.hpp"
#include "eqstream/net/network.hpp"
#include "eqstream/net/weights.hpp"
#include "eqstream/noise.hpp"
#include "eqstream/parallel.hpp"
#include "eqstream/report_json.hpp"
#include "eqstream/rng.hpp"
#include "eqstream/sim_config.hpp"
#include "eqstream/sim_esim.hpp"
#include "eqstream/sim_pix2nvs.hpp"
#include "eqstream/sim_v2e.hpp"
#include "eqstream/stats.hpp"
#include "eqstream/tensorize.hpp"
