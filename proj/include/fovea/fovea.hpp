#pragma once

#include "fovea/adaptive.hpp"
#include "fovea/camera.hpp"
#include "fovea/constraints.hpp"
#include "fovea/dual_quaternion.hpp"
#include "fovea/fd_check.hpp"
#include "fovea/kinematics.hpp"
#include "fovea/qp.hpp"
#include "fovea/quaternion.hpp"
#include "fovea/rng.hpp"
#include "fovea/scenario.hpp"
#include "fovea/scenario_config.hpp"
#include "fovea/task_controller.hpp"
#include "fovea/trace_io.hpp"
