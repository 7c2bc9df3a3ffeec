#pragma once

#include <cstdint>

#include "sqbox/conformal.hpp"
#include "sqbox/multibox.hpp"

namespace sqbox {

// n iid rows from N(0, Sigma) with unit variances and constant correlation
// rho. For rho >= 0 the closed form x = sqrt(rho) z0 1 + sqrt(1-rho) z is
// used; negative rho (valid down to -1/(d-1)) uses the rank-one form
// a z + b (sum z) 1 with a = sqrt(1-rho), b = (sqrt(1+(d-1)rho) - a) / d.
PointSet gen_gaussian(long n, long d, double rho, std::uint64_t seed);

// n iid draws from the t distribution with 1 degree of freedom (standard
// Cauchy), via tan(pi (U - 1/2)).
ScoreList gen_t1(long n, std::uint64_t seed);

// Exact p-quantile of t(1): tan(pi (p - 1/2)).
double true_t1_quantile(double p);

}  // namespace sqbox
