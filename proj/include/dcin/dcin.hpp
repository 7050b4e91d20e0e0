#pragma once

// Umbrella header for the DCIN toolkit.

#include "dcin/augmentation.hpp"
#include "dcin/colorspace.hpp"
#include "dcin/error.hpp"
#include "dcin/image.hpp"
#include "dcin/image_io.hpp"
#include "dcin/loss.hpp"
#include "dcin/parallel.hpp"
#include "dcin/pipeline.hpp"
#include "dcin/reference_index.hpp"
#include "dcin/rng.hpp"
