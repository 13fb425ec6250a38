#pragma once

// Everything in one include.

#include <mempol/error.hpp>
#include <mempol/random.hpp>
#include <mempol/pomdp.hpp>
#include <mempol/models/statistics.hpp>
#include <mempol/models/exponential.hpp>
#include <mempol/models/mixture.hpp>
#include <mempol/models/crbm.hpp>
#include <mempol/models/model.hpp>
#include <mempol/gradient.hpp>
#include <mempol/train.hpp>
#include <mempol/chains.hpp>
#include <mempol/environments.hpp>
#include <mempol/rational.hpp>
#include <mempol/geometry.hpp>
#include <mempol/oracle.hpp>
#include <mempol/io.hpp>
