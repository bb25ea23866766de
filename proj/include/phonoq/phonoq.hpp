#pragma once

#include "calib.hpp"
#include "circuit.hpp"
#include "constants.hpp"
#include "fft.hpp"
#include "fit.hpp"
#include "io.hpp"
#include "ode.hpp"
#include "parallel.hpp"
#include "resonance.hpp"
#include "ringdown.hpp"
#include "rng.hpp"
#include "special.hpp"
#include "synth.hpp"
#include "tls_loss.hpp"
#include "tls_micro.hpp"
