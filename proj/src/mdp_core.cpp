#include "rmdp/mdp_core.hpp"

#include <cmath>
#include <limits>

namespace rmdp {

namespace {

void check_all(const MdpInstance& mdp, const StationaryPolicy& policy, const TransitionKernel& kernel) {
    check_compatible(mdp, policy);
    check_compatible(mdp, kernel);
}

Eigen::PartialPivLU<Mat> resolvent(const MdpInstance& mdp, const StationaryPolicy& policy,
                                   const TransitionKernel& kernel) {
    const int S = mdp.S();
    Mat m = Mat::Identity(S, S) - mdp.gamma * policy_kernel(policy, kernel);
    return Eigen::PartialPivLU<Mat>(m);
}

void check_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) fail(ErrorKind::numerical, std::string("linear solve produced non-finite ") + what);
}

}  // namespace

Mat policy_kernel(const StationaryPolicy& policy, const TransitionKernel& kernel) {
    const int S = kernel.S(), A = kernel.A();
    Mat p_pi = Mat::Zero(S, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double w = policy.pi(s, a);
            if (w != 0.0) p_pi.row(s) += w * kernel.row(s, a);
        }
    return p_pi;
}

Vec policy_cost(const MdpInstance& mdp, const StationaryPolicy& policy) {
    return (mdp.cost.array() * policy.pi.array()).rowwise().sum();
}

Vec value_function(const MdpInstance& mdp, const StationaryPolicy& policy, const TransitionKernel& kernel) {
    check_all(mdp, policy, kernel);
    Vec v = resolvent(mdp, policy, kernel).solve(policy_cost(mdp, policy));
    check_finite(v, "value function");
    return v;
}

double weighted_value(const MdpInstance& mdp, const StationaryPolicy& policy,
                      const TransitionKernel& kernel, const Vec& weight) {
    require_dims(weight.size() == mdp.S(), "weight must have S entries");
    return weight.dot(value_function(mdp, policy, kernel));
}

ValueBundle value_bundle(const MdpInstance& mdp, const StationaryPolicy& policy, const TransitionKernel& kernel) {
    const int S = mdp.S(), A = mdp.A();
    ValueBundle b;
    b.v = value_function(mdp, policy, kernel);
    b.q.resize(S, A);
    b.g.resize(S * A, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int r = s * A + a;
            b.g.row(r) = (mdp.cost(s, a) + mdp.gamma * b.v.array()).matrix().transpose();
            b.q(s, a) = mdp.cost(s, a) + mdp.gamma * kernel.row(s, a).dot(b.v);
        }
    b.adv = b.g;
    for (int r = 0; r < S * A; ++r) b.adv.row(r).array() -= b.q(r / A, r % A);
    return b;
}

VisitationBundle visitation_bundle(const MdpInstance& mdp, const StationaryPolicy& policy,
                                   const TransitionKernel& kernel, bool with_state_action) {
    check_all(mdp, policy, kernel);
    const int S = mdp.S(), A = mdp.A();
    const double gamma = mdp.gamma;
    VisitationBundle out;
    out.d_state = (1.0 - gamma) * resolvent(mdp, policy, kernel).inverse();
    if (!out.d_state.allFinite()) fail(ErrorKind::numerical, "visitation solve produced non-finite values");
    out.d_rho = out.d_state.transpose() * mdp.rho;
    if (with_state_action) {
        // d(s,a|s0,a0) = (1-gamma)[s=s0,a=a0] + gamma sum_s1 P(s1|s0,a0) d(s|s1) pi(a|s)
        Mat d_sa = Mat::Zero(S * A, S * A);
        const Mat next = kernel.matrix() * out.d_state;  // (S*A) x S
        for (int r = 0; r < S * A; ++r) {
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) d_sa(r, s * A + a) = gamma * next(r, s) * policy.pi(s, a);
            d_sa(r, r) += 1.0 - gamma;
        }
        out.d_state_action = std::move(d_sa);
    }
    return out;
}

Vec weighted_visitation(const MdpInstance& mdp, const StationaryPolicy& policy,
                        const TransitionKernel& kernel, const Vec& weight) {
    check_all(mdp, policy, kernel);
    require_dims(weight.size() == mdp.S(), "weight must have S entries");
    // Solve (I - gamma P_pi)^T x = w, then d = (1-gamma) x.
    const int S = mdp.S();
    Mat m = Mat::Identity(S, S) - mdp.gamma * policy_kernel(policy, kernel);
    Vec d = (1.0 - mdp.gamma) * Eigen::PartialPivLU<Mat>(m.transpose()).solve(weight);
    check_finite(d, "visitation");
    return d;
}

KernelGradient adversary_value_gradient(const MdpInstance& mdp, const StationaryPolicy& policy,
                                        const TransitionKernel& kernel, const Vec& weight) {
    check_all(mdp, policy, kernel);
    require_dims(weight.size() == mdp.S(), "weight must have S entries");
    const int S = mdp.S(), A = mdp.A();
    const Mat m = Mat::Identity(S, S) - mdp.gamma * policy_kernel(policy, kernel);
    const Eigen::PartialPivLU<Mat> lu(m);
    KernelGradient out;
    out.v = lu.solve(policy_cost(mdp, policy));
    // m^T x = w with P m = L U: x = P^T L^{-T} U^{-T} w.
    const Mat& f = lu.matrixLU();
    Vec y = f.triangularView<Eigen::Upper>().transpose().solve(weight);
    f.triangularView<Eigen::UnitLower>().transpose().solveInPlace(y);
    out.d = (1.0 - mdp.gamma) * (lu.permutationP().transpose() * y);
    check_finite(out.v, "value function");
    check_finite(out.d, "visitation");
    out.value = weight.dot(out.v);
    const double scale = 1.0 / (1.0 - mdp.gamma);
    out.grad.resize(S * A, S);
    const Eigen::RowVectorXd gv = mdp.gamma * out.v.transpose();
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double w = scale * out.d[s] * policy.pi(s, a);
            out.grad.row(s * A + a) = w * (gv.array() + mdp.cost(s, a)).matrix();
        }
    return out;
}

RowMat adversary_gradient_kernel(const MdpInstance& mdp, const StationaryPolicy& policy,
                                 const TransitionKernel& kernel, const Vec& weight) {
    return adversary_value_gradient(mdp, policy, kernel, weight).grad;
}

Vec adversary_gradient_param(const MdpInstance& mdp, const StationaryPolicy& policy, const AffineKernelMap& map,
                             const Vec& xi, const Vec& weight) {
    require_dims(xi.size() == map.q(), "parameter dimension does not match the affine map");
    return map.pullback(adversary_gradient_kernel(mdp, policy, map.kernel(xi), weight));
}

Mat policy_gradient(const MdpInstance& mdp, const StationaryPolicy& policy,
                    const TransitionKernel& kernel, const Vec& weight) {
    const ValueBundle b = value_bundle(mdp, policy, kernel);
    const Vec d = weighted_visitation(mdp, policy, kernel, weight);
    return (1.0 / (1.0 - mdp.gamma)) * (d.asDiagonal() * b.q);
}

PerformanceDifference performance_difference(const MdpInstance& mdp, const StationaryPolicy& policy,
                                             const TransitionKernel& p, const TransitionKernel& p_prime) {
    check_compatible(mdp, p_prime);
    const int S = mdp.S(), A = mdp.A();
    PerformanceDifference out;
    out.lhs = weighted_value(mdp, policy, p, mdp.rho) - weighted_value(mdp, policy, p_prime, mdp.rho);
    const Vec d = weighted_visitation(mdp, policy, p, mdp.rho);
    const ValueBundle bp = value_bundle(mdp, policy, p_prime);
    double acc = 0.0;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int r = s * A + a;
            acc += d[s] * policy.pi(s, a) * (p.matrix().row(r) - p_prime.matrix().row(r)).dot(bp.g.row(r));
        }
    out.rhs = acc / (1.0 - mdp.gamma);
    return out;
}

OptimalSolution optimal_values(const MdpInstance& mdp, const TransitionKernel& kernel, double tol) {
    check_compatible(mdp, kernel);
    const int S = mdp.S(), A = mdp.A();
    OptimalSolution sol{Vec::Zero(S), std::vector<int>(S, 0)};
    const double stop = tol * (1.0 - mdp.gamma) / (2.0 * mdp.gamma);
    for (int it = 0; it < 1000000; ++it) {
        const Vec cont = kernel.matrix() * sol.v;
        Vec next(S);
        for (int s = 0; s < S; ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                const double q = mdp.cost(s, a) + mdp.gamma * cont[s * A + a];
                if (q < best) { best = q; sol.actions[s] = a; }
            }
            next[s] = best;
        }
        const double diff = (next - sol.v).lpNorm<Eigen::Infinity>();
        sol.v = next;
        if (diff <= stop) return sol;
    }
    throw ConvergenceError("value iteration did not converge", 0.0);
}

}  // namespace rmdp
