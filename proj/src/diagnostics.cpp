#include "rmdp/diagnostics.hpp"

#include <cmath>
#include <random>

namespace rmdp {

double degree_of_nonrectangularity(const UncertaintySet& set, const TransitionKernel& anchor,
                                   const StationaryPolicy& policy, const MdpInstance& mdp, double eps_inner) {
    if (std::holds_alternative<Singleton>(set)) return 0.0;
    const RowMat grad = adversary_gradient_kernel(mdp, policy, anchor, mdp.rho);
    const SRectHull hull = s_rect_hull(set);
    if (hull.already_rectangular) return 0.0;
    const double hull_value = hull_linear_max_oracle(hull, grad, eps_inner).value;
    const double set_value = linear_max_oracle(set, grad, eps_inner).value;
    return hull_value - set_value;
}

namespace {

TransitionKernel sample_member(const UncertaintySet& set, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    if (const auto* e = std::get_if<EllipsoidParam>(&set)) {
        Vec xi = e->center;
        const Vec& h = e->h.diag();
        for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] += normal(rng) * std::sqrt(std::max(e->radius, 1e-6) / h[i]);
        return e->map.kernel(project_param(*e, xi));
    }
    if (const auto* s = std::get_if<Singleton>(&set)) return s->p;
    const double radius = std::visit([](const auto& u) {
        using T = std::decay_t<decltype(u)>;
        if constexpr (std::is_same_v<T, SaRectL2> || std::is_same_v<T, SRectL1>) return u.radius;
        else return 0.0;
    }, set);
    TransitionKernel point = nominal_kernel(set);
    const double sigma = std::max(radius, 1e-3);
    for (Eigen::Index i = 0; i < point.matrix().size(); ++i) point.matrix().data()[i] += sigma * normal(rng);
    return project(set, point);
}

}  // namespace

MismatchEstimate mismatch_coefficient(const UncertaintySet& set, const StationaryPolicy& policy,
                                      const MdpInstance& mdp, int samples, std::uint64_t seed) {
    if (samples < 1) fail(ErrorKind::validation, "mismatch_coefficient needs at least one sample");
    std::mt19937_64 rng(seed);
    MismatchEstimate est;
    for (int n = 0; n < samples; ++n) {
        const TransitionKernel p = sample_member(set, rng);
        const TransitionKernel p_prime = sample_member(set, rng);
        const Vec d = weighted_visitation(mdp, policy, p, mdp.rho);
        const Vec d_prime = weighted_visitation(mdp, policy, p_prime, mdp.rho);
        ++est.samples;
        if (d.minCoeff() < 1e-12 || d_prime.minCoeff() < 1e-12) {
            ++est.violations;
            continue;
        }
        est.value = std::max({est.value, d.cwiseQuotient(d_prime).maxCoeff(), d_prime.cwiseQuotient(d).maxCoeff()});
    }
    return est;
}

}  // namespace rmdp
