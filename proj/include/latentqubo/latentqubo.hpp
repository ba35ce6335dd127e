#pragma once

#include "latentqubo/binarization.hpp"
#include "latentqubo/common.hpp"
#include "latentqubo/config.hpp"
#include "latentqubo/dataset.hpp"
#include "latentqubo/evaluation.hpp"
#include "latentqubo/harness.hpp"
#include "latentqubo/optimizers.hpp"
#include "latentqubo/projection.hpp"
#include "latentqubo/surrogate.hpp"
#include "latentqubo/synthetic.hpp"
