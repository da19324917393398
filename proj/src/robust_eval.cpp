#include "rmdp/robust_eval.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace rmdp {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

void finish(RunTrace& trace, Clock::time_point start) {
    trace.wall_ms = static_cast<double>(since(start)) * 1e-6;
}

void check_weight(const MdpInstance& mdp, const Vec& weight) {
    require_dims(weight.size() == mdp.S(), "weight must have S entries");
    if (weight.minCoeff() < 0.0 || std::abs(weight.sum() - 1.0) > 1e-9)
        fail(ErrorKind::validation, "weight must be a probability vector");
}

void check_set_shape(const MdpInstance& mdp, const UncertaintySet& set) {
    require_dims(set_num_states(set) == mdp.S() && set_num_actions(set) == mdp.A(),
                 "uncertainty set shape does not match the MDP");
}

}  // namespace

// ---------------------------------------------------------------------------
// Projected Langevin dynamics

void PldParams::validate() const {
    if (!(beta > 1.0)) fail(ErrorKind::validation, "PLD inverse temperature beta must exceed 1");
    if (!(eta > 0.0)) fail(ErrorKind::validation, "PLD stepsize must be positive");
    if (iters < 1) fail(ErrorKind::validation, "PLD iteration count must be at least 1");
}

PldResult pld_evaluate(const MdpInstance& mdp, const StationaryPolicy& policy, const UncertaintySet& set,
                       const PldParams& params, const Vec& weight) {
    return pld_evaluate(mdp, policy, set, params, weight, param_initial(set));
}

PldResult pld_evaluate(const MdpInstance& mdp, const StationaryPolicy& policy, const UncertaintySet& set,
                       const PldParams& params, const Vec& weight, const Vec& xi0) {
    params.validate();
    check_weight(mdp, weight);
    check_set_shape(mdp, set);
    require_dims(xi0.size() == param_dim(set), "initial parameter has the wrong dimension");
    const auto start = Clock::now();

    PldResult res;
    res.trace.algorithm = "pld";
    res.trace.seed = params.seed;
    res.trace.params = {{"beta", params.beta}, {"eta", params.eta}, {"iters", params.iters},
                        {"track_best", params.track_best ? 1.0 : 0.0}};

    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double noise = std::sqrt(2.0 * params.eta / params.beta);

    Vec xi = xi0;
    KernelGradient eval = adversary_value_gradient(mdp, policy, param_kernel(set, xi), weight);
    Vec grad = param_pullback(set, eval.grad);
    Vec best_xi = xi;
    double best = eval.value;
    res.trace.records.push_back({0, eval.value, grad.norm(), 0.0, since(start)});
    for (int m = 1; m <= params.iters; ++m) {
        if (!grad.allFinite()) fail(ErrorKind::numerical, "PLD gradient is not finite at iteration " + std::to_string(m));
        Vec step = xi + params.eta * grad;
        for (Eigen::Index i = 0; i < step.size(); ++i) step[i] += noise * normal(rng);
        xi = param_project(set, step);
        eval = adversary_value_gradient(mdp, policy, param_kernel(set, xi), weight);
        grad = param_pullback(set, eval.grad);
        if (eval.value > best) {
            best = eval.value;
            best_xi = xi;
            res.trace.best_iter = m;
        }
        res.trace.records.push_back({m, eval.value, grad.norm(), params.eta, since(start)});
    }
    res.xi = params.track_best ? best_xi : xi;
    res.kernel = param_kernel(set, res.xi);
    res.value = params.track_best ? best : eval.value;
    if (!params.track_best) res.trace.best_iter = params.iters;
    res.trace.best_value = res.value;
    res.trace.termination = "iterations";
    finish(res.trace, start);
    return res;
}

// ---------------------------------------------------------------------------
// Conservative policy iteration

void CpiParams::validate() const {
    if (!(eps > 0.0)) fail(ErrorKind::validation, "CPI tolerance must be positive");
    if (max_iters < 0) fail(ErrorKind::validation, "CPI iteration cap must be nonnegative");
    if (rule == StepRule::fixed && !(fixed_step > 0.0 && fixed_step <= 1.0))
        fail(ErrorKind::validation, "CPI fixed stepsize must lie in (0,1]");
    if (rule == StepRule::clamped_theorem && !(step_min >= 0.0 && step_min <= step_max && step_max <= 1.0 && step_max > 0.0))
        fail(ErrorKind::validation, "CPI step clamps must satisfy 0 <= min <= max <= 1");
    if (!(cost_scale > 0.0)) fail(ErrorKind::validation, "CPI cost scale must be positive");
    if (lmo_eps < 0.0) fail(ErrorKind::validation, "LMO tolerance must be nonnegative");
}

long long cpi_iteration_bound(double gamma, double eps) {
    const double bound = 8.0 * gamma * gamma / (eps * eps * std::pow(1.0 - gamma, 5));
    if (bound >= 9.0e18) return std::numeric_limits<long long>::max();
    return static_cast<long long>(std::ceil(bound));
}

CpiResult cpi_evaluate(const MdpInstance& mdp, const StationaryPolicy& policy, const UncertaintySet& set,
                       const CpiParams& params, const Vec& weight) {
    params.validate();
    check_weight(mdp, weight);
    check_set_shape(mdp, set);
    const auto start = Clock::now();
    const double gamma = mdp.gamma;
    const double lmo_eps = params.lmo_eps > 0.0 ? params.lmo_eps : params.eps;

    CpiResult res;
    res.iteration_bound = cpi_iteration_bound(gamma, params.eps);
    const long long cap = params.max_iters > 0 ? params.max_iters : res.iteration_bound;
    res.trace.algorithm = "cpi";
    res.trace.params = {{"eps", params.eps}, {"max_iters", static_cast<double>(cap)},
                        {"rule", static_cast<double>(params.rule)}, {"cost_scale", params.cost_scale},
                        {"lmo_eps", lmo_eps}};
    if (params.rule == StepRule::fixed) res.trace.params["fixed_step"] = params.fixed_step;

    TransitionKernel p = nominal_kernel(set);
    KernelGradient eval = adversary_value_gradient(mdp, policy, p, weight);
    TransitionKernel best_p = p;
    double best = eval.value;
    long long m = 0;
    for (;; ++m) {
        const LmoResult lmo = linear_max_oracle(set, eval.grad, lmo_eps);
        const double gap = lmo.value - inner(eval.grad, p.matrix());
        res.final_gap = gap;
        if (gap <= params.eps) {
            res.trace.records.push_back({static_cast<int>(m), eval.value, gap, 0.0, since(start)});
            res.trace.termination = "gap";
            break;
        }
        if (m >= cap) {
            res.trace.records.push_back({static_cast<int>(m), eval.value, gap, 0.0, since(start)});
            res.trace.termination = "cap";
            break;
        }
        double alpha = 0.0;
        bool clamped = false;
        const double theorem = gap * std::pow(1.0 - gamma, 3) / (4.0 * gamma * gamma * params.cost_scale);
        switch (params.rule) {
            case StepRule::theorem:
                alpha = std::min(theorem, 1.0);
                clamped = theorem > 1.0;
                break;
            case StepRule::clamped_theorem:
                alpha = std::clamp(theorem, params.step_min, params.step_max);
                clamped = alpha != theorem;
                break;
            case StepRule::fixed:
                alpha = params.fixed_step;
                break;
        }
        res.trace.records.push_back({static_cast<int>(m), eval.value, gap, alpha, since(start)});

        TransitionKernel next(p.S(), p.A(), (1.0 - alpha) * p.matrix() + alpha * lmo.maximizer.matrix());
        KernelGradient next_eval = adversary_value_gradient(mdp, policy, next, weight);
        if (params.record_checks) {
            CpiStepCheck c;
            c.alpha = alpha;
            c.clamped = clamped;
            c.gap = gap;
            c.value_increase = next_eval.value - eval.value;
            c.kernel_drift = (next.matrix() - p.matrix()).cwiseAbs().rowwise().sum().maxCoeff();
            c.visitation_drift = (next_eval.d - eval.d).lpNorm<1>();
            res.checks.push_back(c);
        }
        p = std::move(next);
        eval = std::move(next_eval);
        if (eval.value > best) {
            best = eval.value;
            best_p = p;
            res.trace.best_iter = static_cast<int>(m + 1);
        }
    }
    res.iterations = m;
    if (params.track_best) {
        res.kernel = best_p;
        res.value = best;
    } else {
        res.kernel = p;
        res.value = eval.value;
        res.trace.best_iter = static_cast<int>(m);
    }
    res.trace.best_value = res.value;
    finish(res.trace, start);
    return res;
}

// ---------------------------------------------------------------------------
// Projected gradient baseline

PgdResult pgd_baseline_evaluate(const MdpInstance& mdp, const StationaryPolicy& policy, const UncertaintySet& set,
                                const PgdParams& params, const Vec& weight) {
    check_weight(mdp, weight);
    check_set_shape(mdp, set);
    if (std::holds_alternative<EllipsoidParam>(set))
        fail(ErrorKind::unsupported, "the projected gradient baseline needs a kernel-space projection");
    if (params.step < 0.0 || params.value_tol < 0.0 || params.max_iters < 1)
        fail(ErrorKind::validation, "invalid projected gradient parameters");
    const auto start = Clock::now();
    const double gamma = mdp.gamma;
    const double S = mdp.S();
    const double step = params.step > 0.0 ? params.step : std::pow(1.0 - gamma, 3) / (2.0 * gamma * S * S);

    PgdResult res;
    res.trace.algorithm = "pgd";
    res.trace.params = {{"step", step}, {"value_tol", params.value_tol},
                        {"max_iters", static_cast<double>(params.max_iters)}};
    TransitionKernel p = nominal_kernel(set);
    KernelGradient eval = adversary_value_gradient(mdp, policy, p, weight);
    res.trace.records.push_back({0, eval.value, eval.grad.norm(), step, since(start)});
    res.trace.termination = "cap";
    long long m = 1;
    for (; m <= params.max_iters; ++m) {
        p = project(set, TransitionKernel(p.S(), p.A(), p.matrix() + step * eval.grad));
        const double prev = eval.value;
        eval = adversary_value_gradient(mdp, policy, p, weight);
        res.trace.records.push_back({static_cast<int>(m), eval.value, eval.grad.norm(), step, since(start)});
        if (std::abs(eval.value - prev) <= params.value_tol) {
            res.trace.termination = "value_change";
            break;
        }
    }
    res.iterations = std::min(m, params.max_iters);
    res.kernel = p;
    res.value = eval.value;
    res.trace.best_value = eval.value;
    res.trace.best_iter = static_cast<int>(res.iterations);
    finish(res.trace, start);
    return res;
}

// ---------------------------------------------------------------------------
// Robust value iteration

namespace {

double weight_free_value(const Vec& v) { return v.mean(); }

void require_rectangular(const UncertaintySet& set) {
    if (std::holds_alternative<EllipsoidParam>(set))
        fail(ErrorKind::unsupported, "robust value iteration needs an s- or (s,a)-rectangular set");
}

/// Kernel maximizing sum_a w(s,a) <P(.|s,a), v> in every state, where w = pi for s-rectangular
/// coupling and w = 1 for (s,a)-rectangular or singleton sets.
TransitionKernel inner_max(const UncertaintySet& set, const Vec& v, const StationaryPolicy* policy) {
    const int S = set_num_states(set), A = set_num_actions(set);
    RowMat grad(S * A, S);
    const bool coupled = std::holds_alternative<SRectL1>(set);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double w = coupled && policy ? policy->pi(s, a) : 1.0;
            grad.row(s * A + a) = w * v.transpose();
        }
    return linear_max_oracle(set, grad, 1e-12).maximizer;
}

}  // namespace

RobustViResult robust_vi_evaluate(const MdpInstance& mdp, const StationaryPolicy& policy,
                                  const UncertaintySet& set, double tol) {
    require_rectangular(set);
    check_set_shape(mdp, set);
    check_compatible(mdp, policy);
    if (!(tol > 0.0)) fail(ErrorKind::validation, "robust value iteration tolerance must be positive");
    const int S = mdp.S(), A = mdp.A();
    const double gamma = mdp.gamma;
    const Vec r = policy_cost(mdp, policy);
    auto bellman = [&](const TransitionKernel& p, const Vec& v) -> Vec {
        return r + gamma * policy.pi.cwiseProduct((p.matrix() * v).reshaped<Eigen::RowMajor>(S, A)).rowwise().sum();
    };
    // Howard iteration for the adversary: evaluate the current worst kernel exactly, then
    // re-select it greedily. Values increase monotonically to the robust value; the Bellman
    // residual certifies ||v - v*|| <= residual / (1 - gamma).
    RobustViResult res;
    res.v = value_function(mdp, policy, nominal_kernel(set));
    for (int it = 1; it <= 100000; ++it) {
        res.worst = inner_max(set, res.v, &policy);
        const Vec tv = bellman(res.worst, res.v);
        const double residual = (tv - res.v).lpNorm<Eigen::Infinity>();
        res.iterations = it;
        if (residual <= tol * (1.0 - gamma)) {
            res.v = tv;
            return res;
        }
        const Vec next = value_function(mdp, policy, res.worst);
        // Fall back to a plain Bellman step if the exact evaluation stops making progress.
        res.v = (next - res.v).maxCoeff() > 0.0 ? next : tv;
    }
    throw ConvergenceError("robust value iteration did not converge", 0.0, weight_free_value(res.v));
}

RobustOptimalResult robust_optimal_values(const MdpInstance& mdp, const UncertaintySet& set, double tol) {
    require_rectangular(set);
    check_set_shape(mdp, set);
    if (std::holds_alternative<SRectL1>(set))
        fail(ErrorKind::unsupported, "robust optimal values are implemented for (s,a)-rectangular sets only");
    if (!(tol > 0.0)) fail(ErrorKind::validation, "robust value iteration tolerance must be positive");
    const int S = mdp.S(), A = mdp.A();
    const double gamma = mdp.gamma;
    const double stop = tol * (1.0 - gamma) / (2.0 * gamma);
    RobustOptimalResult res;
    res.v = Vec::Zero(S);
    res.actions.assign(S, 0);
    for (int it = 1; it <= 10000000; ++it) {
        const TransitionKernel p = inner_max(set, res.v, nullptr);
        const Mat q = mdp.cost + gamma * (p.matrix() * res.v).reshaped<Eigen::RowMajor>(S, A);
        Vec next(S);
        for (int s = 0; s < S; ++s) {
            Eigen::Index best = 0;
            next[s] = q.row(s).minCoeff(&best);
            res.actions[s] = static_cast<int>(best);
        }
        const double change = (next - res.v).lpNorm<Eigen::Infinity>();
        res.v = next;
        res.iterations = it;
        if (change <= stop) break;
    }
    return res;
}

}  // namespace rmdp
