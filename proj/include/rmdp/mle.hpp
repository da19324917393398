#pragma once

// Maximum-likelihood estimation of an affine kernel parameter from an observed
// state-action history, and the Wald-type confidence ellipsoid around it.

#include "rmdp/uncertainty.hpp"

namespace rmdp {

/// (1 - alpha) quantile of the chi-square distribution, i.e. the value x with P(X <= x) = p.
double chi2_quantile(int dof, double p);

struct MleFit {
    Vec xi;
    double log_likelihood = 0.0;   // sum_t log P^xi(s_{t+1} | s_t, a_t)
    double residual = 0.0;         // projected-gradient residual at xi
    int iterations = 0;
    std::vector<int> unvisited;    // parameters that only touch (s,a) pairs never visited
    int transitions = 0;
};

/// Maximizes the log-likelihood over the region by spectral projected gradient ascent with
/// Armijo backtracking. Parameters that no visited pair depends on are set to the region
/// projection of 0 (the map's base kernel) and listed in `unvisited`.
MleFit mle_fit(const AffineKernelMap& map, const ParamRegion& region, const History& history,
               double tol = 1e-8, int max_iter = 100000);

/// Observed information -grad^2 l_n(xi), summed over transitions.
Mat observed_information(const AffineKernelMap& map, const History& history, const Vec& xi);

struct ConfidenceOptions {
    double alpha = 0.1;
    int dof = 0;  // chi-square degrees of freedom; 0 means S - 1
};

/// Ellipsoid {xi in region : (xi - xi_n)^T H (xi - xi_n) <= q_{1-alpha}} with H the observed
/// information; this is the set where the second-order expansion of l_n stays within
/// delta = q_{1-alpha} / 2 of its maximum.
EllipsoidParam confidence_ellipsoid(const AffineKernelMap& map, const ParamRegion& region, const History& history,
                                    const ConfidenceOptions& opts);
EllipsoidParam confidence_ellipsoid(const AffineKernelMap& map, const ParamRegion& region, const MleFit& fit,
                                    const History& history, const ConfidenceOptions& opts);

}  // namespace rmdp
