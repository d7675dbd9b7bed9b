#pragma once

#include "blimp/common.hpp"
#include "blimp/dynamics.hpp"
#include "blimp/task.hpp"
#include "blimp/env.hpp"
#include "blimp/nn.hpp"
#include "blimp/sac.hpp"
#include "blimp/spg.hpp"
#include "blimp/rollout.hpp"
#include "blimp/baselines.hpp"
#include "blimp/config.hpp"
#include "blimp/trainer.hpp"
#include "blimp/evalharness.hpp"
