#pragma once

#include "tsa/common.hpp"
#include "tsa/dp.hpp"
#include "tsa/feedback.hpp"
#include "tsa/io.hpp"
#include "tsa/metrics.hpp"
#include "tsa/neighbor_index.hpp"
#include "tsa/oracle.hpp"
#include "tsa/problems.hpp"
#include "tsa/stepper.hpp"
#include "tsa/tree.hpp"
#include "tsa/tree_builder.hpp"
#include "tsa/types.hpp"
#include "tsa/value_table.hpp"
