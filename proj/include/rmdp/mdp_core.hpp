#pragma once

// Exact tabular computations for a fixed (policy, kernel) pair: value functions,
// visitation distributions and the two policy gradients.

#include "rmdp/affine_map.hpp"

#include <optional>

namespace rmdp {

/// V, Q, action-next-state values G and the adversary's advantage G - Q.
struct ValueBundle {
    Vec v;       // S
    Mat q;       // S x A
    RowMat g;    // (S*A) x S, row s*A+a
    RowMat adv;  // (S*A) x S
};

/// Discounted visitation distributions. `d_state_action` is only filled on request
/// since it is (S*A) x (S*A).
struct VisitationBundle {
    Mat d_state;  // row s0 is d(.|s0)
    std::optional<Mat> d_state_action;  // row s0*A+a0, column s*A+a
    Vec d_rho;
};

/// State-to-state kernel under the policy: P_pi(s,s') = sum_a pi(a|s) P(s'|s,a).
Mat policy_kernel(const StationaryPolicy& policy, const TransitionKernel& kernel);
/// Expected one-step cost under the policy.
Vec policy_cost(const MdpInstance& mdp, const StationaryPolicy& policy);

/// Solves (I - gamma P_pi) V = r_pi by dense LU.
Vec value_function(const MdpInstance& mdp, const StationaryPolicy& policy, const TransitionKernel& kernel);

/// rho-weighted value sum_s w(s) V(s).
double weighted_value(const MdpInstance& mdp, const StationaryPolicy& policy,
                      const TransitionKernel& kernel, const Vec& weight);

ValueBundle value_bundle(const MdpInstance& mdp, const StationaryPolicy& policy, const TransitionKernel& kernel);

VisitationBundle visitation_bundle(const MdpInstance& mdp, const StationaryPolicy& policy,
                                   const TransitionKernel& kernel, bool with_state_action = false);

/// Weighted visitation d(.|w) = w^T (1-gamma)(I - gamma P_pi)^{-1}.
Vec weighted_visitation(const MdpInstance& mdp, const StationaryPolicy& policy,
                        const TransitionKernel& kernel, const Vec& weight);

/// Gradient of sum_s0 w(s0) V(s0) with respect to the kernel entries, as an (S*A) x S tensor:
/// (1/(1-gamma)) d(s|w) pi(a|s) G(s,a,s').
RowMat adversary_gradient_kernel(const MdpInstance& mdp, const StationaryPolicy& policy,
                                 const TransitionKernel& kernel, const Vec& weight);

/// Value, weighted visitation and kernel gradient from a single factorization.
struct KernelGradient {
    double value = 0.0;  // sum_s w(s) V(s)
    Vec v;
    Vec d;               // d(.|w)
    RowMat grad;         // (S*A) x S
};
KernelGradient adversary_value_gradient(const MdpInstance& mdp, const StationaryPolicy& policy,
                                        const TransitionKernel& kernel, const Vec& weight);

/// Chain rule through an affine kernel map: J^T vec(grad_P V) at P = P^xi.
Vec adversary_gradient_param(const MdpInstance& mdp, const StationaryPolicy& policy, const AffineKernelMap& map,
                             const Vec& xi, const Vec& weight);

/// Gradient of sum_s0 w(s0) V(s0) with respect to the policy: (1/(1-gamma)) d(s|w) Q(s,a).
Mat policy_gradient(const MdpInstance& mdp, const StationaryPolicy& policy,
                    const TransitionKernel& kernel, const Vec& weight);

/// Both sides of the performance-difference identity across kernels, for weight rho.
struct PerformanceDifference {
    double lhs = 0.0;  // V^P(rho) - V^P'(rho)
    double rhs = 0.0;  // (1/(1-gamma)) sum d^P(s|rho) pi(a|s) sum_s' (P-P')(s'|s,a) G^P'(s,a,s')
    double discrepancy() const { return lhs - rhs; }
};

PerformanceDifference performance_difference(const MdpInstance& mdp, const StationaryPolicy& policy,
                                             const TransitionKernel& p, const TransitionKernel& p_prime);

/// Frobenius inner product of two same-shaped tensors.
inline double inner(const RowMat& x, const RowMat& y) { return (x.array() * y.array()).sum(); }

/// Optimal (cost-minimizing) values of an ordinary MDP by value iteration to sup-norm tolerance.
struct OptimalSolution {
    Vec v;
    std::vector<int> actions;
};
OptimalSolution optimal_values(const MdpInstance& mdp, const TransitionKernel& kernel, double tol = 1e-12);

}  // namespace rmdp
