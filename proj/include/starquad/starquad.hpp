#pragma once

#include "starquad/common.hpp"
#include "starquad/config.hpp"
#include "starquad/convergence.hpp"
#include "starquad/domain.hpp"
#include "starquad/engine.hpp"
#include "starquad/lattice.hpp"
#include "starquad/lemma_lab.hpp"
#include "starquad/lemma_suite.hpp"
#include "starquad/nodes.hpp"
#include "starquad/partition.hpp"
#include "starquad/rule_io.hpp"
