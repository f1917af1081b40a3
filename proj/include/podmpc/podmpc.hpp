// SPDX-License-Identifier: MIT
//
// Umbrella header.

#pragma once

#include "podmpc/core.hpp"
#include "podmpc/tridiagonal.hpp"
#include "podmpc/fd_model.hpp"
#include "podmpc/openloop.hpp"
#include "podmpc/pod.hpp"
#include "podmpc/rom.hpp"
#include "podmpc/stability.hpp"
#include "podmpc/mpc.hpp"
#include "podmpc/presets.hpp"
#include "podmpc/config.hpp"
#include "podmpc/export.hpp"
#include "podmpc/pipeline.hpp"
