#pragma once

#include "audits.hpp"
#include "dynamics.hpp"
#include "engel.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "hyperbolicity.hpp"
#include "lie_algebra.hpp"
#include "model_io.hpp"
#include "models.hpp"
#include "report.hpp"
