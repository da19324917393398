#pragma once

// Robust policy improvement: min over policies of the worst-case value, by an actor-critic
// scheme whose critic is a robust evaluation solver and whose actor takes projected
// policy-gradient steps.

#include "rmdp/robust_eval.hpp"

#include <optional>
#include <variant>

namespace rmdp {

/// Lipschitz constant of the value in the policy: sqrt(A) / (1-gamma)^2.
double policy_lipschitz(int num_actions, double gamma);
/// Smoothness constant of the value in the policy: 2 gamma A / (1-gamma)^3.
double policy_smoothness(int num_actions, double gamma);
/// Default actor step sqrt(2S/K) / L and critic tolerance L sqrt(2S/K) / 2.
double default_actor_step(int num_states, int num_actions, double gamma, int iters);
double default_critic_tol(int num_states, int num_actions, double gamma, int iters);

struct ExactCritic {
    double tol = 1e-8;
};

using CriticConfig = std::variant<PldParams, CpiParams, ExactCritic>;

struct AcaParams {
    int iters = 100;
    std::optional<double> eta;  // default: sqrt(2S/K) / L
    std::optional<double> eps;  // critic tolerance, default: L sqrt(2S/K) / 2 (CPI critic only)
    CriticConfig critic = ExactCritic{};
    std::uint64_t seed = 0;     // PLD critic seed at iteration k is seed ^ k
    bool ascent = false;        // take the displayed "+" step instead of descending cost
    bool warm_start = false;    // PLD critic starts from the previous critic's parameter
    void validate() const;
};

struct ImprovementRecord {
    int k = 0;
    double critic_value = 0.0;   // critic's worst-case value estimate for pi(k)
    std::string critic_termination;
    double grad_norm = 0.0;
    double policy_delta = 0.0;   // ||pi(k+1) - pi(k)||_F
    double descent_inner = 0.0;  // <grad, pi(k+1) - pi(k)>
    std::int64_t elapsed_ns = 0;
};

struct ImprovementTrace {
    std::vector<ImprovementRecord> records;
    std::vector<StationaryPolicy> policies;  // pi(0), ..., pi(K-1), then the final pi(K)
    StationaryPolicy final_policy;
    int best_k = 0;                          // iterate with the smallest critic value
    double running_average = 0.0;           // mean critic value over the K iterates
    double wall_ms = 0.0;
};

/// Starts from the uniform policy; each iteration runs the critic for pi(k), then steps
/// pi(k+1) = Proj(pi(k) - eta grad_pi V^{P(k)}(rho)) row by row.
ImprovementTrace actor_critic(const MdpInstance& mdp, const UncertaintySet& set, const AcaParams& params,
                              const Vec& weight);

/// Running average of critic values minus the reference optimum.
double averaged_suboptimality(const ImprovementTrace& trace, double reference_opt);

inline constexpr const char* kImprovementCsvHeader = "k,critic_value,grad_norm,policy_delta,elapsed_ns";

}  // namespace rmdp
