#pragma once

#include "pbem/driver.hpp"
#include "pbem/energy.hpp"
#include "pbem/errors.hpp"
#include "pbem/estimator.hpp"
#include "pbem/geometry.hpp"
#include "pbem/gmres.hpp"
#include "pbem/kernels.hpp"
#include "pbem/mesh.hpp"
#include "pbem/oracle.hpp"
#include "pbem/physics.hpp"
#include "pbem/quadrature.hpp"
#include "pbem/refine.hpp"
#include "pbem/solver.hpp"
