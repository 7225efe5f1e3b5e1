/**
 * @file
 * @brief Convenience header including the whole library.
 */

#pragma once

#include "bloomcast/exceptions.hpp"
#include "bloomcast/imbalance.hpp"
#include "bloomcast/lstm/lstm.hpp"
#include "bloomcast/lstm/model_io.hpp"
#include "bloomcast/lstm/training.hpp"
#include "bloomcast/metrics.hpp"
#include "bloomcast/phenology_data.hpp"
#include "bloomcast/svm/kernel.hpp"
#include "bloomcast/svm/model_io.hpp"
#include "bloomcast/svm/ovo.hpp"
#include "bloomcast/svm/smo_solver.hpp"
