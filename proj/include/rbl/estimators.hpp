#pragma once

#include "rbl/gabp.hpp"
#include "rbl/mds.hpp"
#include "rbl/multilateration.hpp"
#include "rbl/nls.hpp"
#include "rbl/procrustes.hpp"
#include "rbl/relative.hpp"
#include "rbl/semantic.hpp"
