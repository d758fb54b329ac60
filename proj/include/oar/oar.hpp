// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef OAR_OAR_HPP
#define OAR_OAR_HPP

#include "oar/errors.hpp"
#include "oar/evaluation.hpp"
#include "oar/io.hpp"
#include "oar/kdtree.hpp"
#include "oar/network.hpp"
#include "oar/objective.hpp"
#include "oar/optim.hpp"
#include "oar/perturbation.hpp"
#include "oar/point_cloud.hpp"
#include "oar/registration.hpp"
#include "oar/reporting.hpp"
#include "oar/rng.hpp"

#endif  // OAR_OAR_HPP
