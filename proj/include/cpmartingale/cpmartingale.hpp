#pragma once

#include "cpmartingale/betting.hpp"
#include "cpmartingale/classical.hpp"
#include "cpmartingale/detector.hpp"
#include "cpmartingale/martingale.hpp"
#include "cpmartingale/math.hpp"
#include "cpmartingale/ncm.hpp"
#include "cpmartingale/oracle.hpp"
#include "cpmartingale/prefix_moments.hpp"
#include "cpmartingale/report.hpp"
#include "cpmartingale/rng.hpp"
#include "cpmartingale/score_buffer.hpp"
#include "cpmartingale/series.hpp"
#include "cpmartingale/simulate.hpp"
