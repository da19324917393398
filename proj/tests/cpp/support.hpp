#pragma once

#include "rmdp/mdp_core.hpp"
#include "rmdp/uncertainty.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

namespace testing {

using namespace rmdp;

struct Instance {
    MdpInstance mdp;
    TransitionKernel p;
    StationaryPolicy pi;
};

inline Vec random_simplex(int n, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = e(rng);
    return x / x.sum();
}

inline TransitionKernel random_kernel(int S, int A, std::mt19937_64& rng) {
    TransitionKernel p(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) p.row(s, a) = random_simplex(S, rng).transpose();
    return p;
}

inline StationaryPolicy random_policy(int S, int A, std::mt19937_64& rng) {
    StationaryPolicy pi;
    pi.pi.resize(S, A);
    for (int s = 0; s < S; ++s) pi.pi.row(s) = random_simplex(A, rng).transpose();
    return pi;
}

/// Costs U[0,1]; with `dominant`, one action per state costs U[0,0.3] and the others U[0.7,1].
inline Instance random_instance(int S, int A, double gamma, std::uint64_t seed, bool dominant = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Instance in;
    in.mdp.num_states = S;
    in.mdp.num_actions = A;
    in.mdp.gamma = gamma;
    in.mdp.rho = Vec::Constant(S, 1.0 / S);
    in.mdp.cost.resize(S, A);
    for (int s = 0; s < S; ++s) {
        const int best = static_cast<int>(u(rng) * A) % A;
        for (int a = 0; a < A; ++a)
            in.mdp.cost(s, a) = dominant ? (a == best ? 0.3 * u(rng) : 0.7 + 0.3 * u(rng)) : u(rng);
    }
    in.p = random_kernel(S, A, rng);
    in.pi = random_policy(S, A, rng);
    return in;
}

/// Random direction with zero row sums (tangent to the product of simplices).
inline RowMat row_sum_zero_direction(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    RowMat d(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) d(i, j) = n(rng);
        d.row(i).array() -= d.row(i).mean();
    }
    return d / d.norm();
}

inline double central_difference(const std::function<double(double)>& f, double h) {
    return (f(h) - f(-h)) / (2.0 * h);
}

/// Central differences at h and h/2 combined to cancel the h^2 term.
inline double richardson_difference(const std::function<double(double)>& f, double h) {
    return (4.0 * central_difference(f, h / 2) - central_difference(f, h)) / 3.0;
}

inline double rel_err(double got, double want, double floor = 1e-8) {
    return std::abs(got - want) / std::max(std::abs(want), floor);
}

/// Value by the truncated expectation recursion V_{t+1} = r + gamma P_pi V_t.
inline Vec truncated_value(const MdpInstance& mdp, const StationaryPolicy& pi, const TransitionKernel& p,
                           int horizon) {
    const int S = mdp.S(), A = mdp.A();
    Vec v = Vec::Zero(S);
    for (int t = 0; t < horizon; ++t) {
        Vec next(S);
        for (int s = 0; s < S; ++s) {
            double acc = 0.0;
            for (int a = 0; a < A; ++a) {
                double ev = 0.0;
                for (int j = 0; j < S; ++j) ev += p(s, a, j) * v[j];
                acc += pi.pi(s, a) * (mdp.cost(s, a) + mdp.gamma * ev);
            }
            next[s] = acc;
        }
        v = next;
    }
    return v;
}

}  // namespace testing
