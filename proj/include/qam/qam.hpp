#pragma once

#include "qam/config.hpp"
#include "qam/dissipators.hpp"
#include "qam/errors.hpp"
#include "qam/evolver.hpp"
#include "qam/experiment.hpp"
#include "qam/fock.hpp"
#include "qam/generator.hpp"
#include "qam/io.hpp"
#include "qam/moments.hpp"
#include "qam/observables.hpp"
#include "qam/ou.hpp"
#include "qam/wigner.hpp"
