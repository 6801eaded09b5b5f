#pragma once

#include "pact/cara_solver.hpp"
#include "pact/errors.hpp"
#include "pact/general_solver.hpp"
#include "pact/io.hpp"
#include "pact/model.hpp"
#include "pact/rootfind.hpp"
#include "pact/shock.hpp"
#include "pact/utility.hpp"
#include "pact/verification.hpp"
