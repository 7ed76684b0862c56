#pragma once

// Umbrella header for the numerical library (everything except the run layer,
// which additionally needs OpenSSL: include "lacsim/run.hpp" for that).

#include "lacsim/config.hpp"
#include "lacsim/hamiltonian.hpp"
#include "lacsim/lindblad.hpp"
#include "lacsim/polarization.hpp"
#include "lacsim/propagation.hpp"
#include "lacsim/spectra.hpp"
#include "lacsim/spin_algebra.hpp"
#include "lacsim/steady_state.hpp"
