// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pointy/backbone.hpp"
#include "pointy/common.hpp"
#include "pointy/config.hpp"
#include "pointy/data.hpp"
#include "pointy/embed.hpp"
#include "pointy/geometry.hpp"
#include "pointy/gradcheck.hpp"
#include "pointy/io.hpp"
#include "pointy/nn.hpp"
#include "pointy/rng.hpp"
#include "pointy/tensor.hpp"
#include "pointy/train.hpp"
#include "pointy/zeroshot.hpp"
