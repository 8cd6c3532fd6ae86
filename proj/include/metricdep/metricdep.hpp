#ifndef METRICDEP_METRICDEP_HPP_
#define METRICDEP_METRICDEP_HPP_

#include "metricdep/common.hpp"
#include "metricdep/estimators.hpp"
#include "metricdep/exact_oracle.hpp"
#include "metricdep/kernel_metric.hpp"
#include "metricdep/random.hpp"
#include "metricdep/scenarios.hpp"

#endif // METRICDEP_METRICDEP_HPP_
