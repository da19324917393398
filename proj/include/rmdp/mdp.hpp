#pragma once

#include "rmdp/common.hpp"

#include <utility>
#include <vector>

namespace rmdp {

/// Finite discounted MDP without its transition kernel: states, actions, costs,
/// discount and initial distribution. Costs are minimized.
struct MdpInstance {
    int num_states = 0;
    int num_actions = 0;
    Mat cost;      // S x A
    double gamma = 0.0;
    Vec rho;       // S

    int S() const { return num_states; }
    int A() const { return num_actions; }

    /// Throws ErrorKind::validation unless every invariant holds.
    void validate() const;
};

/// Transition kernel P(s'|s,a) stored as an (S*A) x S row-major matrix, row s*A+a.
class TransitionKernel {
public:
    TransitionKernel() = default;
    TransitionKernel(int num_states, int num_actions);
    TransitionKernel(int num_states, int num_actions, RowMat p);

    int S() const { return num_states_; }
    int A() const { return num_actions_; }

    auto row(int s, int a) { return p_.row(s * num_actions_ + a); }
    auto row(int s, int a) const { return p_.row(s * num_actions_ + a); }
    double operator()(int s, int a, int next) const { return p_(s * num_actions_ + a, next); }
    double& operator()(int s, int a, int next) { return p_(s * num_actions_ + a, next); }

    const RowMat& matrix() const { return p_; }
    RowMat& matrix() { return p_; }

    /// Flat (s, a, s') view of length S*A*S.
    Eigen::Map<const Vec> flat() const { return {p_.data(), p_.size()}; }
    Eigen::Map<Vec> flat() { return {p_.data(), p_.size()}; }

    static TransitionKernel from_flat(int num_states, int num_actions, const Vec& flat);

    /// Max deviation from row-stochasticity (negative mass or row-sum error).
    double stochasticity_residual() const;
    void validate(double tol = 1e-12) const;

private:
    int num_states_ = 0;
    int num_actions_ = 0;
    RowMat p_;
};

/// Stationary randomized policy pi(a|s) as an S x A matrix.
struct StationaryPolicy {
    Mat pi;

    int S() const { return static_cast<int>(pi.rows()); }
    int A() const { return static_cast<int>(pi.cols()); }

    static StationaryPolicy uniform(int num_states, int num_actions);
    static StationaryPolicy deterministic(int num_actions, const std::vector<int>& actions);
    void validate(double tol = 1e-12) const;
};

/// Affine cost rescaling c' = (c - offset) / scale into [0, 1]; `value` maps values back.
struct CostTransform {
    double offset = 0.0;
    double scale = 1.0;

    double restore_value(double normalized, double gamma) const {
        return normalized * scale + offset / (1.0 - gamma);
    }
};

/// Rescales costs affinely to [0,1]. Returns the rescaled instance and the inverse transform.
std::pair<MdpInstance, CostTransform> normalize_costs(const MdpInstance& mdp);

struct StateAction {
    int s = 0;
    int a = 0;
    bool operator==(const StateAction&) const = default;
};
/// Observed trajectory (s_0, a_0, ..., s_{n-1}, a_{n-1}).
using History = std::vector<StateAction>;

void check_compatible(const MdpInstance& mdp, const StationaryPolicy& policy);
void check_compatible(const MdpInstance& mdp, const TransitionKernel& kernel);

}  // namespace rmdp
