#pragma once

#include "sparch/analysis.hpp"
#include "sparch/coo.hpp"
#include "sparch/csr.hpp"
#include "sparch/dram.hpp"
#include "sparch/hw_config.hpp"
#include "sparch/matrix_market.hpp"
#include "sparch/merge_tree.hpp"
#include "sparch/merger.hpp"
#include "sparch/prefetch.hpp"
#include "sparch/reference.hpp"
#include "sparch/rmat.hpp"
#include "sparch/schedule.hpp"
#include "sparch/simulator.hpp"
