#pragma once

#include "mwld/dynamics.hpp"
#include "mwld/errors.hpp"
#include "mwld/griddp.hpp"
#include "mwld/mc.hpp"
#include "mwld/oracle.hpp"
#include "mwld/outcome.hpp"
#include "mwld/pieces.hpp"
#include "mwld/policy.hpp"
#include "mwld/ratefn.hpp"
#include "mwld/region.hpp"
#include "mwld/source.hpp"
#include "mwld/types.hpp"
