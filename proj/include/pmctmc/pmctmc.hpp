#ifndef PMCTMC_PMCTMC_HPP
#define PMCTMC_PMCTMC_HPP

#include "pmctmc/errors.hpp"
#include "pmctmc/reaction.hpp"
#include "pmctmc/statespace.hpp"
#include "pmctmc/expmono.hpp"
#include "pmctmc/oracle.hpp"
#include "pmctmc/debias.hpp"
#include "pmctmc/dataset.hpp"
#include "pmctmc/likelihood.hpp"
#include "pmctmc/simulate.hpp"
#include "pmctmc/sampler.hpp"
#include "pmctmc/diagnostics.hpp"
#include "pmctmc/tuning.hpp"

#endif  // PMCTMC_PMCTMC_HPP
