#pragma once

#include "share/adapter.hpp"
#include "share/datagen.hpp"
#include "share/error.hpp"
#include "share/geometry.hpp"
#include "share/io.hpp"
#include "share/landscape.hpp"
#include "share/loop.hpp"
#include "share/metrics.hpp"
#include "share/mlp.hpp"
#include "share/random.hpp"
#include "share/sampling.hpp"

namespace share {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace share
