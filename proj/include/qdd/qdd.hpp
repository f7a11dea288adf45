// Copyright 2026 The qd-deplete Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qdd/level_model.hpp"
#include "qdd/pulse_protocol.hpp"
#include "qdd/master_equation.hpp"
#include "qdd/kmc.hpp"
#include "qdd/observables.hpp"
#include "qdd/csv.hpp"
#include "qdd/svg_plot.hpp"
#include "qdd/config.hpp"
#include "qdd/experiments.hpp"
