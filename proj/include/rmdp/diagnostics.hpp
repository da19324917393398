#pragma once

#include "rmdp/mdp_core.hpp"
#include "rmdp/uncertainty.hpp"

#include <cstdint>

namespace rmdp {

/// delta_P(anchor): max over the s-rectangular hull minus max over the set of the linear
/// model <grad_P V^anchor(rho), .>. Zero for s-rectangular sets; never below -2 eps_inner.
double degree_of_nonrectangularity(const UncertaintySet& set, const TransitionKernel& anchor,
                                   const StationaryPolicy& policy, const MdpInstance& mdp,
                                   double eps_inner = 1e-8);

struct MismatchEstimate {
    double value = 1.0;   // max over sampled pairs of max_s d^P(s|rho) / d^P'(s|rho)
    int samples = 0;      // number of kernel pairs drawn
    int violations = 0;   // pairs skipped because some visitation entry fell below 1e-12
};

/// Sampling lower bound on the distribution mismatch coefficient delta_d. Kernels are drawn
/// by projecting Gaussian perturbations of the nominal point onto the set.
MismatchEstimate mismatch_coefficient(const UncertaintySet& set, const StationaryPolicy& policy,
                                      const MdpInstance& mdp, int samples, std::uint64_t seed);

}  // namespace rmdp
