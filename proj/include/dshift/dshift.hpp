#pragma once

#include "dshift/aspects/divergence.hpp"
#include "dshift/aspects/embedding.hpp"
#include "dshift/aspects/greedy_match.hpp"
#include "dshift/aspects/kde.hpp"
#include "dshift/boxsample/boxsample.hpp"
#include "dshift/common/error.hpp"
#include "dshift/common/random.hpp"
#include "dshift/common/text.hpp"
#include "dshift/corpus/equalize.hpp"
#include "dshift/corpus/features.hpp"
#include "dshift/corpus/manifest.hpp"
#include "dshift/corpus/types.hpp"
#include "dshift/corpus/voc_xml.hpp"
#include "dshift/diversity/groups.hpp"
#include "dshift/metrics/metrics.hpp"
#include "dshift/pipeline/config.hpp"
#include "dshift/pipeline/pipeline.hpp"
#include "dshift/pipeline/report.hpp"
#include "dshift/quality/blur.hpp"
#include "dshift/quality/energy.hpp"
#include "dshift/quality/png_io.hpp"
#include "dshift/quality/raster.hpp"
#include "dshift/synthbench/synthbench.hpp"
