#pragma once

#include "eqhol/ansatz.hpp"
#include "eqhol/bundle.hpp"
#include "eqhol/circle.hpp"
#include "eqhol/conventions.hpp"
#include "eqhol/error.hpp"
#include "eqhol/expr.hpp"
#include "eqhol/forms.hpp"
#include "eqhol/group.hpp"
#include "eqhol/holonomy.hpp"
#include "eqhol/local_verdict.hpp"
#include "eqhol/locality.hpp"
#include "eqhol/scenario.hpp"
#include "eqhol/path.hpp"
#include "eqhol/solvers.hpp"
#include "eqhol/space.hpp"
#include "eqhol/verdict.hpp"
