// sefdm.hpp - umbrella header

#pragma once

#include "sefdm/core.hpp"
#include "sefdm/op_count.hpp"
#include "sefdm/txrx.hpp"
#include "sefdm/detectors.hpp"
#include "sefdm/complexity.hpp"
#include "sefdm/harness.hpp"
