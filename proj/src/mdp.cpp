#include "rmdp/mdp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace rmdp {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::validation: return "validation";
        case ErrorKind::convergence: return "convergence";
        case ErrorKind::numerical: return "numerical";
        case ErrorKind::unsupported: return "unsupported";
    }
    return "unknown";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

namespace {

double simplex_residual(const Eigen::Ref<const Vec>& p) {
    double worst = std::abs(p.sum() - 1.0);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i])) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, -p[i]);
    }
    return worst;
}

}  // namespace

void MdpInstance::validate() const {
    std::ostringstream err;
    if (num_states <= 0 || num_actions <= 0) err << "S and A must be positive; ";
    if (cost.rows() != num_states || cost.cols() != num_actions) err << "cost must be S x A; ";
    if (rho.size() != num_states) err << "rho must have S entries; ";
    if (!(gamma > 0.0 && gamma < 1.0)) err << "gamma must lie in (0,1); ";
    if (err.tellp() == 0) {
        if (!cost.allFinite()) err << "costs must be finite; ";
        if (simplex_residual(rho) > 1e-12) err << "rho must be a probability vector; ";
    }
    if (err.tellp() != 0) fail(ErrorKind::validation, "invalid MDP: " + err.str());
}

TransitionKernel::TransitionKernel(int num_states, int num_actions)
    : num_states_(num_states), num_actions_(num_actions),
      p_(RowMat::Zero(num_states * num_actions, num_states)) {}

TransitionKernel::TransitionKernel(int num_states, int num_actions, RowMat p)
    : num_states_(num_states), num_actions_(num_actions), p_(std::move(p)) {
    require_dims(p_.rows() == num_states * num_actions && p_.cols() == num_states,
                 "kernel matrix must be (S*A) x S");
}

TransitionKernel TransitionKernel::from_flat(int num_states, int num_actions, const Vec& flat) {
    require_dims(flat.size() == static_cast<Eigen::Index>(num_states) * num_actions * num_states,
                 "flat kernel must have S*A*S entries");
    TransitionKernel k(num_states, num_actions);
    k.flat() = flat;
    return k;
}

double TransitionKernel::stochasticity_residual() const {
    double worst = 0.0;
    for (Eigen::Index r = 0; r < p_.rows(); ++r) worst = std::max(worst, simplex_residual(p_.row(r).transpose()));
    return worst;
}

void TransitionKernel::validate(double tol) const {
    const double res = stochasticity_residual();
    if (!(res <= tol)) {
        std::ostringstream os;
        os << "kernel rows are not probability vectors (residual " << res << ")";
        fail(ErrorKind::validation, os.str());
    }
}

StationaryPolicy StationaryPolicy::uniform(int num_states, int num_actions) {
    return {Mat::Constant(num_states, num_actions, 1.0 / num_actions)};
}

StationaryPolicy StationaryPolicy::deterministic(int num_actions, const std::vector<int>& actions) {
    StationaryPolicy p{Mat::Zero(static_cast<Eigen::Index>(actions.size()), num_actions)};
    for (std::size_t s = 0; s < actions.size(); ++s) p.pi(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    return p;
}

void StationaryPolicy::validate(double tol) const {
    for (Eigen::Index s = 0; s < pi.rows(); ++s) {
        if (!(simplex_residual(pi.row(s).transpose()) <= tol))
            fail(ErrorKind::validation, "policy row " + std::to_string(s) + " is not a probability vector");
    }
}

std::pair<MdpInstance, CostTransform> normalize_costs(const MdpInstance& mdp) {
    CostTransform t;
    t.offset = mdp.cost.minCoeff();
    const double span = mdp.cost.maxCoeff() - t.offset;
    t.scale = span > 0.0 ? span : 1.0;
    MdpInstance out = mdp;
    out.cost = (mdp.cost.array() - t.offset) / t.scale;
    return {out, t};
}

void check_compatible(const MdpInstance& mdp, const StationaryPolicy& policy) {
    require_dims(policy.S() == mdp.S() && policy.A() == mdp.A(), "policy shape does not match MDP");
}

void check_compatible(const MdpInstance& mdp, const TransitionKernel& kernel) {
    require_dims(kernel.S() == mdp.S() && kernel.A() == mdp.A(), "kernel shape does not match MDP");
}

}  // namespace rmdp
