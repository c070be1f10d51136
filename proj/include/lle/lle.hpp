#pragma once

#include "lle/cloud.hpp"
#include "lle/dataset.hpp"
#include "lle/descriptors.hpp"
#include "lle/ensemble.hpp"
#include "lle/error.hpp"
#include "lle/feature.hpp"
#include "lle/io.hpp"
#include "lle/learner.hpp"
#include "lle/metric.hpp"
#include "lle/offline_eval.hpp"
#include "lle/protocol.hpp"
#include "lle/random.hpp"
