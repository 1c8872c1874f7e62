#pragma once

#include "calib/core.hpp"
#include "calib/binning.hpp"
#include "calib/interval.hpp"
#include "calib/lp.hpp"
#include "calib/smooth.hpp"
#include "calib/lowerdist.hpp"
#include "calib/kernel.hpp"
#include "calib/fixtures.hpp"
#include "calib/io.hpp"
