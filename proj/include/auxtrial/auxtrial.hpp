#pragma once

// Umbrella header.

#include "auxtrial/calibration.hpp"
#include "auxtrial/config.hpp"
#include "auxtrial/errors.hpp"
#include "auxtrial/stylized_example.hpp"
#include "auxtrial/experiment.hpp"
#include "auxtrial/group_seq.hpp"
#include "auxtrial/multitest.hpp"
#include "auxtrial/numerics.hpp"
#include "auxtrial/optimize.hpp"
#include "auxtrial/parallel.hpp"
#include "auxtrial/posterior.hpp"
#include "auxtrial/prior_model.hpp"
#include "auxtrial/random.hpp"
#include "auxtrial/scenario.hpp"
#include "auxtrial/spending.hpp"
#include "auxtrial/trial_data.hpp"
#include "auxtrial/utility.hpp"
