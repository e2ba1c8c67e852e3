#pragma once

#include "microsim/align.hpp"
#include "microsim/dataset.hpp"
#include "microsim/error.hpp"
#include "microsim/fft.hpp"
#include "microsim/filters.hpp"
#include "microsim/image.hpp"
#include "microsim/io.hpp"
#include "microsim/metrics.hpp"
#include "microsim/optics.hpp"
#include "microsim/parallel.hpp"
#include "microsim/pose.hpp"
#include "microsim/random.hpp"
#include "microsim/render.hpp"
#include "microsim/segment.hpp"
