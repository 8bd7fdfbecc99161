#pragma once

// Umbrella header for the k-plane transform laboratory.

#include "kplane/drury.hpp"
#include "kplane/errors.hpp"
#include "kplane/estimate.hpp"
#include "kplane/extremal.hpp"
#include "kplane/field_io.hpp"
#include "kplane/fields.hpp"
#include "kplane/geometry.hpp"
#include "kplane/linalg.hpp"
#include "kplane/quadrature.hpp"
#include "kplane/rng.hpp"
#include "kplane/transforms.hpp"
