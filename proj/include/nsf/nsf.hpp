// Umbrella header.
#pragma once

#include "nsf/analytic.hpp"
#include "nsf/common.hpp"
#include "nsf/eval.hpp"
#include "nsf/export.hpp"
#include "nsf/kernels.hpp"
#include "nsf/loss.hpp"
#include "nsf/model_io.hpp"
#include "nsf/net.hpp"
#include "nsf/optim.hpp"
#include "nsf/raw_io.hpp"
#include "nsf/train.hpp"
#include "nsf/volume.hpp"
#include "nsf/vtk.hpp"

namespace nsf {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nsf
