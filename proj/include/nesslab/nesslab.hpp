#pragma once

#include "errors.hpp"
#include "operators.hpp"
#include "models.hpp"
#include "ode.hpp"
#include "lindblad.hpp"
#include "measures.hpp"
#include "gaussian.hpp"
#include "feedback.hpp"
#include "rwa.hpp"
#include "quadrature.hpp"
#include "delayed.hpp"
#include "sweep.hpp"
