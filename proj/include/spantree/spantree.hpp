#pragma once

#include "spantree/errors.hpp"
#include "spantree/graph.hpp"
#include "spantree/laplacian.hpp"
#include "spantree/moments.hpp"
#include "spantree/distribution.hpp"
#include "spantree/oracle.hpp"
#include "spantree/sampler.hpp"
#include "spantree/graph_io.hpp"
