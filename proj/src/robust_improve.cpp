#include "rmdp/robust_improve.hpp"

#include "rmdp/projections.hpp"

#include <chrono>
#include <cmath>

namespace rmdp {

double policy_lipschitz(int num_actions, double gamma) {
    return std::sqrt(static_cast<double>(num_actions)) / ((1.0 - gamma) * (1.0 - gamma));
}

double policy_smoothness(int num_actions, double gamma) {
    return 2.0 * gamma * num_actions / std::pow(1.0 - gamma, 3);
}

double default_actor_step(int num_states, int num_actions, double gamma, int iters) {
    return std::sqrt(2.0 * num_states / iters) / policy_lipschitz(num_actions, gamma);
}

double default_critic_tol(int num_states, int num_actions, double gamma, int iters) {
    return policy_lipschitz(num_actions, gamma) * std::sqrt(2.0 * num_states / iters) / 2.0;
}

void AcaParams::validate() const {
    if (iters < 1) fail(ErrorKind::validation, "actor-critic needs at least one iteration");
    if (eta && !(*eta > 0.0)) fail(ErrorKind::validation, "actor stepsize must be positive");
    if (eps && !(*eps > 0.0)) fail(ErrorKind::validation, "critic tolerance must be positive");
    std::visit([](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ExactCritic>) {
            if (!(c.tol > 0.0)) fail(ErrorKind::validation, "exact critic tolerance must be positive");
        } else {
            c.validate();
        }
    }, critic);
}

namespace {

struct CriticOutcome {
    TransitionKernel kernel;
    double value = 0.0;
    std::string termination;
    std::optional<Vec> xi;
};

CriticOutcome run_critic(const MdpInstance& mdp, const StationaryPolicy& policy, const UncertaintySet& set,
                         const AcaParams& params, double eps, int k, const std::optional<Vec>& warm,
                         const Vec& weight) {
    return std::visit([&](const auto& c) -> CriticOutcome {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, ExactCritic>) {
            const RobustViResult vi = robust_vi_evaluate(mdp, policy, set, c.tol);
            return {vi.worst, weight.dot(vi.v), "exact", std::nullopt};
        } else if constexpr (std::is_same_v<T, CpiParams>) {
            CpiParams p = c;
            p.eps = eps;
            const CpiResult r = cpi_evaluate(mdp, policy, set, p, weight);
            return {r.kernel, r.value, r.trace.termination, std::nullopt};
        } else {
            PldParams p = c;
            p.seed = params.seed ^ static_cast<std::uint64_t>(k);
            const PldResult r = params.warm_start && warm ? pld_evaluate(mdp, policy, set, p, weight, *warm)
                                                          : pld_evaluate(mdp, policy, set, p, weight);
            return {r.kernel, r.value, r.trace.termination, r.xi};
        }
    }, params.critic);
}

}  // namespace

ImprovementTrace actor_critic(const MdpInstance& mdp, const UncertaintySet& set, const AcaParams& params,
                              const Vec& weight) {
    params.validate();
    mdp.validate();
    require_dims(set_num_states(set) == mdp.S() && set_num_actions(set) == mdp.A(),
                 "uncertainty set shape does not match the MDP");
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
    };
    const int S = mdp.S(), A = mdp.A(), K = params.iters;
    const double eta = params.eta.value_or(default_actor_step(S, A, mdp.gamma, K));
    const double eps = params.eps.value_or(default_critic_tol(S, A, mdp.gamma, K));
    const double sign = params.ascent ? 1.0 : -1.0;

    ImprovementTrace trace;
    StationaryPolicy pi = StationaryPolicy::uniform(S, A);
    std::optional<Vec> warm;
    double total = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
        trace.policies.push_back(pi);
        const CriticOutcome critic = run_critic(mdp, pi, set, params, eps, k, warm, weight);
        warm = critic.xi;
        const Mat grad = policy_gradient(mdp, pi, critic.kernel, weight);
        StationaryPolicy next;
        next.pi.resize(S, A);
        for (int s = 0; s < S; ++s)
            next.pi.row(s) = simplex_project((pi.pi.row(s) + sign * eta * grad.row(s)).transpose()).transpose();
        ImprovementRecord rec;
        rec.k = k;
        rec.critic_value = critic.value;
        rec.critic_termination = critic.termination;
        rec.grad_norm = grad.norm();
        rec.policy_delta = (next.pi - pi.pi).norm();
        rec.descent_inner = (grad.array() * (next.pi - pi.pi).array()).sum();
        rec.elapsed_ns = elapsed();
        trace.records.push_back(rec);
        total += critic.value;
        if (critic.value < best) {
            best = critic.value;
            trace.best_k = k;
        }
        pi = std::move(next);
    }
    trace.final_policy = pi;
    trace.policies.push_back(pi);
    trace.running_average = total / K;
    trace.wall_ms = static_cast<double>(elapsed()) * 1e-6;
    return trace;
}

double averaged_suboptimality(const ImprovementTrace& trace, double reference_opt) {
    if (trace.records.empty()) fail(ErrorKind::validation, "empty improvement trace");
    double total = 0.0;
    for (const auto& r : trace.records) total += r.critic_value;
    return total / static_cast<double>(trace.records.size()) - reference_opt;
}

}  // namespace rmdp
