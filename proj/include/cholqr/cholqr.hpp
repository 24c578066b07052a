#ifndef CHOLQR_CHOLQR_HPP_
#define CHOLQR_CHOLQR_HPP_

#include "cholqr/kernels.hpp"
#include "cholqr/factor_core.hpp"
#include "cholqr/objective.hpp"
#include "cholqr/info_pivots.hpp"
#include "cholqr/swap_select.hpp"
#include "cholqr/nystrom_system.hpp"
#include "cholqr/hyper_opt.hpp"
#include "cholqr/baselines.hpp"
#include "cholqr/trainer.hpp"
#include "cholqr/predictor.hpp"
#include "cholqr/synth.hpp"
#include "cholqr/io.hpp"
#include "cholqr/config.hpp"
#include "cholqr/model_io.hpp"
#include "cholqr/harness.hpp"

#endif // CHOLQR_CHOLQR_HPP_
