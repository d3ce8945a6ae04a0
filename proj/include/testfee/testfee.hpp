#pragma once

#include "testfee/errors.hpp"
#include "testfee/measure.hpp"
#include "testfee/equilibrium.hpp"
#include "testfee/oracle.hpp"
#include "testfee/designer.hpp"
#include "testfee/demand.hpp"
#include "testfee/random.hpp"
