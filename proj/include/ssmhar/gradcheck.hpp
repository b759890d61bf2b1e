#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ssmhar {

struct GradCheckResult {
  std::string op;
  std::size_t probes = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Central-finite-difference verification of every backward rule, run in
// double precision. For each probe the loss is a fixed random weighting of
// the op output; every input coordinate is perturbed by +-eps and the
// two-sided difference quotient is compared against the recorded gradient.
// A coordinate passes when |analytic - fd| < abs_floor or the relative
// error against max(|analytic|, |fd|) is below tol.
std::vector<GradCheckResult> run_gradcheck_suite(std::size_t probes = 20,
                                                 double eps = 1e-4,
                                                 double tol = 1e-3,
                                                 std::uint64_t seed = 42);

}  // namespace ssmhar
