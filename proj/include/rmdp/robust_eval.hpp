#pragma once

// Robust policy evaluation: max over an uncertainty set of the rho-weighted policy value.
// Projected Langevin dynamics, conservative policy iteration (Frank-Wolfe), a projected
// gradient baseline, and robust value iteration for rectangular sets.

#include "rmdp/mdp_core.hpp"
#include "rmdp/uncertainty.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rmdp {

struct TraceRecord {
    int iter = 0;
    double value = 0.0;   // V(rho) at the iterate
    double gap = 0.0;     // Frank-Wolfe gap (CPI) or gradient norm (PLD, PGD)
    double step = 0.0;
    std::int64_t elapsed_ns = 0;
};

struct RunTrace {
    std::string algorithm;
    std::map<std::string, double> params;
    std::uint64_t seed = 0;
    std::vector<TraceRecord> records;
    double best_value = 0.0;
    int best_iter = 0;
    std::string termination;
    double wall_ms = 0.0;
};

// ---------------------------------------------------------------------------

struct PldParams {
    double beta = 160.0;  // inverse temperature, > 1
    double eta = 0.8;
    int iters = 100;
    std::uint64_t seed = 0;
    bool track_best = true;
    void validate() const;
};

struct PldResult {
    Vec xi;                   // returned parameter (best or last iterate)
    TransitionKernel kernel;
    double value = 0.0;
    RunTrace trace;
};

/// xi <- Proj(xi + eta grad_xi V(rho) + sqrt(2 eta / beta) w), w standard normal, starting from
/// the set's nominal parameter. Kernel-space sets run under the identity embedding.
PldResult pld_evaluate(const MdpInstance& mdp, const StationaryPolicy& policy, const UncertaintySet& set,
                       const PldParams& params, const Vec& weight);
PldResult pld_evaluate(const MdpInstance& mdp, const StationaryPolicy& policy, const UncertaintySet& set,
                       const PldParams& params, const Vec& weight, const Vec& xi0);

// ---------------------------------------------------------------------------

enum class StepRule {
    theorem,          // alpha = G (1-gamma)^3 / (4 gamma^2 kappa), clamped to (0, 1]
    fixed,            // alpha = fixed_step
    clamped_theorem,  // theorem rule clamped to [step_min, step_max]
};

struct CpiParams {
    double eps = 1e-2;
    long long max_iters = 0;  // 0: the iteration bound ceil(8 gamma^2 / (eps^2 (1-gamma)^5))
    StepRule rule = StepRule::theorem;
    double fixed_step = 0.1;
    double step_min = 0.0;
    double step_max = 1.0;
    double cost_scale = 1.0;  // kappa; costs spanning more than [0,1] can pass their span here
    double lmo_eps = 0.0;     // 0: same as eps
    bool track_best = true;
    bool record_checks = false;
    void validate() const;
};

/// Per-iteration quantities used to check the drift and monotonicity properties.
struct CpiStepCheck {
    double alpha = 0.0;
    bool clamped = false;
    double gap = 0.0;
    double value_increase = 0.0;     // V(m+1) - V(m)
    double kernel_drift = 0.0;       // max over rows of ||P(m+1) - P(m)||_1
    double visitation_drift = 0.0;   // ||d^{P(m+1)}(.|rho) - d^{P(m)}(.|rho)||_1
};

struct CpiResult {
    TransitionKernel kernel;
    double value = 0.0;
    double final_gap = 0.0;
    long long iterations = 0;
    long long iteration_bound = 0;
    RunTrace trace;
    std::vector<CpiStepCheck> checks;
};

long long cpi_iteration_bound(double gamma, double eps);

CpiResult cpi_evaluate(const MdpInstance& mdp, const StationaryPolicy& policy, const UncertaintySet& set,
                       const CpiParams& params, const Vec& weight);

// ---------------------------------------------------------------------------

struct PgdParams {
    double step = 0.0;       // 0: (1-gamma)^3 / (2 gamma S^2)
    double value_tol = 2e-5; // stop when |V(m+1) - V(m)| <= value_tol
    long long max_iters = 1000000;
};

struct PgdResult {
    TransitionKernel kernel;
    double value = 0.0;
    long long iterations = 0;
    RunTrace trace;
};

/// P <- Proj(P + step grad_P V(rho)) in kernel space.
PgdResult pgd_baseline_evaluate(const MdpInstance& mdp, const StationaryPolicy& policy, const UncertaintySet& set,
                                const PgdParams& params, const Vec& weight);

// ---------------------------------------------------------------------------

struct RobustViResult {
    Vec v;
    TransitionKernel worst;  // kernel attaining the inner maxima at the returned V
    int iterations = 0;
};

/// Fixed-policy robust Bellman iteration; sup-norm error of v is at most tol.
RobustViResult robust_vi_evaluate(const MdpInstance& mdp, const StationaryPolicy& policy,
                                  const UncertaintySet& set, double tol);

struct RobustOptimalResult {
    Vec v;
    std::vector<int> actions;
    int iterations = 0;
};

/// min over policies of the worst-case value for (s,a)-rectangular sets (deterministic policies suffice).
RobustOptimalResult robust_optimal_values(const MdpInstance& mdp, const UncertaintySet& set, double tol);

}  // namespace rmdp
