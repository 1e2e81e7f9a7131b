#pragma once

// Umbrella header: hourly EV-fleet energy prediction over a city grid.

#include "evcast/combiner.hpp"
#include "evcast/config.hpp"
#include "evcast/errors.hpp"
#include "evcast/features.hpp"
#include "evcast/geo.hpp"
#include "evcast/grid.hpp"
#include "evcast/ingest.hpp"
#include "evcast/model_io.hpp"
#include "evcast/pipeline.hpp"
#include "evcast/rand.hpp"
#include "evcast/report_io.hpp"
#include "evcast/spatial_nn.hpp"
#include "evcast/synthetic.hpp"
#include "evcast/temporal_crf.hpp"
#include "evcast/text.hpp"
#include "evcast/time.hpp"
