#pragma once

#include "gmlp/cli.hpp"
#include "gmlp/common.hpp"
#include "gmlp/csr_graph.hpp"
#include "gmlp/dataset.hpp"
#include "gmlp/message_agg.hpp"
#include "gmlp/model.hpp"
#include "gmlp/pipeline.hpp"
#include "gmlp/propagation.hpp"
#include "gmlp/run_config.hpp"
#include "gmlp/serialize.hpp"
#include "gmlp/train.hpp"
