#pragma once

#include "emomix/adaptor.hpp"
#include "emomix/alignment.hpp"
#include "emomix/checkpoint.hpp"
#include "emomix/config.hpp"
#include "emomix/error.hpp"
#include "emomix/features.hpp"
#include "emomix/manifest.hpp"
#include "emomix/metrics.hpp"
#include "emomix/mixer.hpp"
#include "emomix/pipeline.hpp"
#include "emomix/rng.hpp"
#include "emomix/synthetic.hpp"
#include "emomix/track_io.hpp"
#include "emomix/training.hpp"
#include "emomix/wav.hpp"
