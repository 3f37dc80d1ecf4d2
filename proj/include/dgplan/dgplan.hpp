#pragma once

#include "dgplan/error.hpp"
#include "dgplan/format.hpp"
#include "dgplan/grp.hpp"
#include "dgplan/io.hpp"
#include "dgplan/moalo.hpp"
#include "dgplan/network.hpp"
#include "dgplan/objectives.hpp"
#include "dgplan/parallel.hpp"
#include "dgplan/pareto.hpp"
#include "dgplan/pipeline.hpp"
#include "dgplan/power_flow.hpp"
#include "dgplan/ppf.hpp"
#include "dgplan/siting.hpp"
#include "dgplan/stochastic.hpp"
#include "dgplan/storage.hpp"
