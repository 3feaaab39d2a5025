#pragma once

#include "ssmspike/core/errors.hpp"
#include "ssmspike/core/ops.hpp"
#include "ssmspike/core/parallel.hpp"
#include "ssmspike/core/scalar.hpp"
#include "ssmspike/core/tape.hpp"
#include "ssmspike/core/types.hpp"

#include "ssmspike/neurons/classic.hpp"
#include "ssmspike/neurons/init.hpp"
#include "ssmspike/neurons/ssm_neuron.hpp"

#include "ssmspike/nn/checkpoint.hpp"
#include "ssmspike/nn/layers.hpp"
#include "ssmspike/nn/network.hpp"

#include "ssmspike/data/binned.hpp"
#include "ssmspike/data/dataset.hpp"
#include "ssmspike/data/idx.hpp"
#include "ssmspike/data/synthetic.hpp"

#include "ssmspike/train/evaluate.hpp"
#include "ssmspike/train/loss.hpp"
#include "ssmspike/train/optim.hpp"
#include "ssmspike/train/trainer.hpp"

#include "ssmspike/analysis/ablation.hpp"
#include "ssmspike/analysis/cost.hpp"
#include "ssmspike/analysis/spike_rate.hpp"

#include "ssmspike/config/run_config.hpp"
