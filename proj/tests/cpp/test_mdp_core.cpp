#include "doctest.h"
#include "support.hpp"

#include "rmdp/environments.hpp"

using namespace rmdp;
using namespace testing;

namespace {

MdpInstance tiny(int S, int A, double gamma, Mat cost) {
    MdpInstance m;
    m.num_states = S;
    m.num_actions = A;
    m.gamma = gamma;
    m.cost = std::move(cost);
    m.rho = Vec::Constant(S, 1.0 / S);
    return m;
}

TransitionKernel cycle2(int A) {
    TransitionKernel p(2, A);
    for (int a = 0; a < A; ++a) {
        p(0, a, 1) = 1.0;
        p(1, a, 0) = 1.0;
    }
    return p;
}

}  // namespace

TEST_CASE("value of a single absorbing state is the geometric series") {
    auto m = tiny(1, 1, 0.9, Mat::Constant(1, 1, 0.5));
    TransitionKernel p(1, 1);
    p(0, 0, 0) = 1.0;
    const Vec v = value_function(m, StationaryPolicy::uniform(1, 1), p);
    CHECK(v[0] == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("two-state cycle alternates costs") {
    Mat c(2, 1);
    c << 1.0, 0.0;
    auto m = tiny(2, 1, 0.9, c);
    const Vec v = value_function(m, StationaryPolicy::uniform(2, 1), cycle2(1));
    CHECK(v[0] == doctest::Approx(1.0 / (1.0 - 0.81)).epsilon(1e-13));
    CHECK(v[1] == doctest::Approx(0.9 / (1.0 - 0.81)).epsilon(1e-13));
}

TEST_CASE("gridworld uniform policy value matches the rollout estimate") {
    // Frozen from a 1e6-trajectory, horizon-200 rollout: 5.8453 +- 0.0087; the exact value is 5.84.
    auto g = build_gridworld();
    const double v = weighted_value(g.mdp, StationaryPolicy::uniform(25, 4), g.p_ref, g.mdp.rho);
    CHECK(v == doctest::Approx(5.84).epsilon(1e-12));
    CHECK(std::abs(v - 5.845262) < 3 * 0.008746);
}

TEST_CASE("value function agrees with discounted rollouts") {
    auto in = random_instance(4, 3, 0.8, 0);
    const Vec v = value_function(in.mdp, in.pi, in.p);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto draw = [&](auto row) {
        double x = u(rng), acc = 0.0;
        for (int j = 0; j < row.size(); ++j) {
            acc += row[j];
            if (x < acc) return j;
        }
        return static_cast<int>(row.size()) - 1;
    };
    const int n = 100000, horizon = 60;  // 0.8^60 / 0.2 < 1e-5
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k) {
        int s = 0;
        double disc = 1.0, tot = 0.0;
        for (int t = 0; t < horizon; ++t) {
            const int a = draw(in.pi.pi.row(s));
            tot += disc * in.mdp.cost(s, a);
            disc *= in.mdp.gamma;
            s = draw(in.p.row(s, a));
        }
        sum += tot;
        sq += tot * tot;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - v[0]) < 3 * se);
}

TEST_CASE("value bundle recursions hold on random instances") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 r(seed);
        const int S = 1 + static_cast<int>(r() % 6), A = 1 + static_cast<int>(r() % 4);
        auto in = random_instance(S, A, 0.5 + 0.45 * (r() % 100) / 100.0, seed + 1000);
        const auto b = value_bundle(in.mdp, in.pi, in.p);
        double worst = 0.0;
        for (int s = 0; s < S; ++s) {
            worst = std::max(worst, std::abs(b.v[s] - in.pi.pi.row(s).dot(b.q.row(s))));
            for (int a = 0; a < A; ++a) {
                worst = std::max(worst, std::abs(b.q(s, a) - in.mdp.cost(s, a) -
                                                 in.mdp.gamma * in.p.row(s, a).dot(b.v.transpose())));
                double pa = 0.0;
                for (int j = 0; j < S; ++j) {
                    worst = std::max(worst, std::abs(b.g(s * A + a, j) - in.mdp.cost(s, a) - in.mdp.gamma * b.v[j]));
                    CHECK(b.adv(s * A + a, j) == b.g(s * A + a, j) - b.q(s, a));
                    CHECK(std::abs(b.adv(s * A + a, j)) <= in.mdp.gamma / (1 - in.mdp.gamma) + 1e-12);
                    pa += in.p(s, a, j) * b.adv(s * A + a, j);
                }
                worst = std::max(worst, std::abs(pa));
            }
        }
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("one-state bundle is the fixed point") {
    auto m = tiny(1, 1, 0.9, Mat::Constant(1, 1, 0.5));
    TransitionKernel p(1, 1);
    p(0, 0, 0) = 1.0;
    const auto b = value_bundle(m, StationaryPolicy::uniform(1, 1), p);
    CHECK(b.q(0, 0) == doctest::Approx(5.0));
    CHECK(b.g(0, 0) == doctest::Approx(5.0));
    CHECK(std::abs(b.adv(0, 0)) < 1e-12);
}

TEST_CASE("bundle matches the truncated recursion") {
    auto in = random_instance(4, 3, 0.9, 0);
    const auto b = value_bundle(in.mdp, in.pi, in.p);
    const Vec v = truncated_value(in.mdp, in.pi, in.p, 500);
    CHECK((b.v - v).lpNorm<Eigen::Infinity>() <= 1e-6);
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 3; ++a)
            CHECK(std::abs(b.q(s, a) - in.mdp.cost(s, a) - 0.9 * in.p.row(s, a).dot(v.transpose())) <= 1e-6);
}

TEST_CASE("adversary advantage identity across kernels") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto in = random_instance(4, 3, 0.85, seed);
        std::mt19937_64 rng(seed + 77);
        const auto p2 = random_kernel(4, 3, rng);
        const auto b2 = value_bundle(in.mdp, in.pi, p2);
        double worst = 0.0;
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 3; ++a) {
                const int r = s * 3 + a;
                const double lhs = in.p.row(s, a).dot(b2.adv.row(r));
                const double rhs = (in.p.row(s, a) - p2.row(s, a)).dot(b2.g.row(r));
                worst = std::max(worst, std::abs(lhs - rhs));
            }
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("visitation distributions") {
    SUBCASE("absorbing single state") {
        auto m = tiny(1, 1, 0.3, Mat::Constant(1, 1, 1.0));
        TransitionKernel p(1, 1);
        p(0, 0, 0) = 1.0;
        const auto d = visitation_bundle(m, StationaryPolicy::uniform(1, 1), p);
        CHECK(d.d_state(0, 0) == doctest::Approx(1.0));
    }
    SUBCASE("two-state cycle") {
        auto m = tiny(2, 1, 0.5, Mat::Zero(2, 1));
        const auto d = visitation_bundle(m, StationaryPolicy::uniform(2, 1), cycle2(1));
        CHECK(d.d_state(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
        CHECK(d.d_state(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    }
    SUBCASE("rows are distributions and state-action marginals are consistent") {
        auto in = random_instance(4, 3, 0.7, 5);
        const auto d = visitation_bundle(in.mdp, in.pi, in.p, true);
        const Mat& dsa = *d.d_state_action;
        for (int s0 = 0; s0 < 4; ++s0) {
            CHECK(d.d_state.row(s0).sum() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(d.d_state.row(s0).minCoeff() >= 0.0);
            for (int s = 0; s < 4; ++s)
                for (int a = 0; a < 3; ++a) {
                    double mix = 0.0;
                    for (int a0 = 0; a0 < 3; ++a0) mix += in.pi.pi(s0, a0) * dsa(s0 * 3 + a0, s * 3 + a);
                    CHECK(std::abs(mix - d.d_state(s0, s) * in.pi.pi(s, a)) < 1e-12);
                }
        }
        CHECK((d.d_rho - d.d_state.transpose() * in.mdp.rho).norm() < 1e-13);
    }
    SUBCASE("monte carlo occupancy") {
        auto in = random_instance(4, 2, 0.6, 0);
        const auto d = visitation_bundle(in.mdp, in.pi, in.p);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::geometric_distribution<int> stop(1.0 - in.mdp.gamma);
        // A geometric(1-gamma) stopping time samples the discounted occupancy directly.
        const int n = 200000;
        Vec counts = Vec::Zero(4);
        for (int k = 0; k < n; ++k) {
            int s = 1;
            const int T = stop(rng);
            for (int t = 0; t < T; ++t) {
                double x = u(rng), acc = 0.0;
                int a = 0;
                for (; a < 1; ++a) {
                    acc += in.pi.pi(s, a);
                    if (x < acc) break;
                }
                x = u(rng);
                acc = 0.0;
                int next = 0;
                for (; next < 3; ++next) {
                    acc += in.p(s, a, next);
                    if (x < acc) break;
                }
                s = next;
            }
            counts[s] += 1.0;
        }
        for (int s = 0; s < 4; ++s) {
            const double phat = counts[s] / n;
            const double se = std::sqrt(d.d_state(1, s) * (1 - d.d_state(1, s)) / n);
            CHECK(std::abs(phat - d.d_state(1, s)) < 3 * se + 1e-12);
        }
    }
}

TEST_CASE("adversary gradient matches finite differences along row-sum-zero directions") {
    for (std::uint64_t seed = 1; seed < 51; ++seed) {
        auto in = random_instance(3, 2, 0.8, seed);
        std::mt19937_64 rng(seed * 31);
        const RowMat grad = adversary_gradient_kernel(in.mdp, in.pi, in.p, in.mdp.rho);
        const RowMat dir = row_sum_zero_direction(6, 3, rng);
        auto f = [&](double h) {
            TransitionKernel q(3, 2, in.p.matrix() + h * dir);
            return weighted_value(in.mdp, in.pi, q, in.mdp.rho);
        };
        CHECK(rel_err(inner(grad, dir), central_difference(f, 1e-6)) <= 1e-5);
    }
}

TEST_CASE("adversary gradient on a single state is flat in the next state") {
    Mat c(1, 2);
    c << 0.3, 0.7;
    auto m = tiny(1, 2, 0.8, c);
    TransitionKernel p(1, 2);
    p(0, 0, 0) = p(0, 1, 0) = 1.0;
    StationaryPolicy pi;
    pi.pi.resize(1, 2);
    pi.pi << 0.4, 0.6;
    const double v = value_function(m, pi, p)[0];
    const RowMat g = adversary_gradient_kernel(m, pi, p, Vec::Ones(1));
    CHECK(g(0, 0) == doctest::Approx(0.4 * (0.3 + 0.8 * v) / 0.2));
    CHECK(g(1, 0) == doctest::Approx(0.6 * (0.7 + 0.8 * v) / 0.2));
}

TEST_CASE("adversary gradient for a nearly myopic discount") {
    auto in = random_instance(3, 2, 1e-6, 4);
    std::mt19937_64 rng(9);
    const RowMat grad = adversary_gradient_kernel(in.mdp, in.pi, in.p, in.mdp.rho);
    const Vec d = weighted_visitation(in.mdp, in.pi, in.p, in.mdp.rho);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        const RowMat dir = row_sum_zero_direction(6, 3, rng);
        auto f = [&](double h) {
            TransitionKernel q(3, 2, in.p.matrix() + h * dir);
            return weighted_value(in.mdp, in.pi, q, in.mdp.rho);
        };
        worst = std::max(worst, std::abs(inner(grad, dir) - central_difference(f, 1e-3)));
    }
    CHECK(worst <= 1e-4);
    // Leading order: d ~ rho and the gradient is pi(a|s) c(s,a) rho(s) per unit mass.
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a)
            CHECK(std::abs(grad(s * 2 + a, 0) - in.mdp.rho[s] * in.pi.pi(s, a) * in.mdp.cost(s, a)) <= 1e-4);
    CHECK((d - in.mdp.rho).norm() < 1e-5);
}

TEST_CASE("parameter gradient through affine maps") {
    SUBCASE("identity embedding") {
        auto in = random_instance(3, 2, 0.9, 12);
        const auto map = AffineKernelMap::identity(3, 2);
        const Vec xi = map.coordinates(in.p);
        const Vec g = adversary_gradient_param(in.mdp, in.pi, map, xi, in.mdp.rho);
        const RowMat gk = adversary_gradient_kernel(in.mdp, in.pi, in.p, in.mdp.rho);
        CHECK((g - gk.reshaped<Eigen::RowMajor>()).norm() < 1e-12);
    }
    SUBCASE("one free transition pair") {
        auto in = random_instance(2, 1, 0.9, 3);
        AffineKernelMap map;
        map.num_states = 2;
        map.num_actions = 1;
        map.base = in.p.matrix();
        map.base.row(0).setZero();
        map.base(0, 1) = 1.0;
        map.jacobian.resize(4, 1);
        map.jacobian.insert(0, 0) = 1.0;
        map.jacobian.insert(1, 0) = -1.0;
        Vec xi(1);
        xi << 0.35;
        const double g = adversary_gradient_param(in.mdp, in.pi, map, xi, in.mdp.rho)[0];
        auto f = [&](double h) {
            Vec x(1);
            x << 0.35 + h;
            return weighted_value(in.mdp, in.pi, map.kernel(x), in.mdp.rho);
        };
        CHECK(rel_err(g, central_difference(f, 1e-6)) <= 1e-5);
    }
    SUBCASE("gridworld ellipsoid map at the reference") {
        auto grid = build_gridworld();
        const auto set = gridworld_ellipsoid(grid, 1.0);
        const auto pi = StationaryPolicy::uniform(25, 4);
        CHECK(set.map.q() == 24 * 25 * 4);
        const Vec g = adversary_gradient_param(grid.mdp, pi, set.map, set.center, grid.mdp.rho);
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int k = 0; k < 5; ++k) {
            Vec dir(set.map.q());
            for (int i = 0; i < dir.size(); ++i) dir[i] = n(rng);
            dir /= dir.norm();
            auto f = [&](double h) {
                return weighted_value(grid.mdp, pi, set.map.kernel(set.center + h * dir), grid.mdp.rho);
            };
            CHECK(rel_err(g.dot(dir), central_difference(f, 1e-6)) <= 1e-5);
        }
    }
}

TEST_CASE("policy gradient") {
    SUBCASE("finite differences on random instances") {
        for (std::uint64_t seed = 2; seed < 52; ++seed) {
            auto in = random_instance(3, 3, 0.8, seed);
            std::mt19937_64 rng(seed + 5);
            const Mat g = policy_gradient(in.mdp, in.pi, in.p, in.mdp.rho);
            const RowMat dir = row_sum_zero_direction(3, 3, rng);
            auto f = [&](double h) {
                StationaryPolicy q{in.pi.pi + h * Mat(dir)};
                return weighted_value(in.mdp, q, in.p, in.mdp.rho);
            };
            CHECK(rel_err((g.array() * Mat(dir).array()).sum(), central_difference(f, 1e-6)) <= 1e-5);
        }
    }
    SUBCASE("two-action bandit") {
        Mat c(1, 2);
        c << 0.0, 1.0;
        auto m = tiny(1, 2, 0.5, c);
        TransitionKernel p(1, 2);
        p(0, 0, 0) = p(0, 1, 0) = 1.0;
        const Mat g = policy_gradient(m, StationaryPolicy::uniform(1, 2), p, Vec::Ones(1));
        CHECK(g(0, 0) == doctest::Approx(1.0));
        CHECK(g(0, 1) == doctest::Approx(3.0));
        // V = 0.5 / (1 - 0.5) = 1 here; the gradient is 2 (gamma V, 1 + gamma V).
        CHECK(value_function(m, StationaryPolicy::uniform(1, 2), p)[0] == doctest::Approx(1.0));
    }
    SUBCASE("single action has no feasible direction") {
        auto in = random_instance(3, 1, 0.9, 8);
        const Mat g = policy_gradient(in.mdp, in.pi, in.p, in.mdp.rho);
        CHECK(g.cols() == 1);  // the only row-sum-zero direction is 0
    }
}

TEST_CASE("performance difference identity") {
    SUBCASE("same kernel") {
        auto in = random_instance(3, 2, 0.9, 3);
        const auto pd = performance_difference(in.mdp, in.pi, in.p, in.p);
        CHECK(pd.lhs == 0.0);
        CHECK(std::abs(pd.rhs) < 1e-12);
    }
    SUBCASE("random pairs") {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            std::mt19937_64 r(seed);
            const int S = 1 + static_cast<int>(r() % 6), A = 1 + static_cast<int>(r() % 4);
            auto in = random_instance(S, A, 0.9, seed);
            const auto p2 = random_kernel(S, A, r);
            CHECK(std::abs(performance_difference(in.mdp, in.pi, in.p, p2).discrepancy()) <= 1e-9);
        }
    }
    SUBCASE("gridworld perturbed row") {
        auto g = build_gridworld();
        TransitionKernel p2 = g.p_ref;
        const int s = 12, a = 0;
        int from = 0;
        p2.row(s, a).maxCoeff(&from);
        p2(s, a, from) -= 0.05;
        p2(s, a, 13) += 0.05;
        const auto pd = performance_difference(g.mdp, StationaryPolicy::uniform(25, 4), g.p_ref, p2);
        CHECK(std::abs(pd.discrepancy()) <= 1e-8);
        CHECK(pd.lhs != 0.0);
    }
}

TEST_CASE("policy distance bound") {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 100; ++k) {
        const auto a = random_policy(5, 3, rng), b = random_policy(5, 3, rng);
        CHECK((a.pi - b.pi).norm() <= std::sqrt(2.0 * 5));
    }
}

TEST_CASE("optimal values by value iteration") {
    auto in = random_instance(3, 2, 0.9, 21);
    const auto opt = optimal_values(in.mdp, in.p);
    const auto pi = StationaryPolicy::deterministic(2, opt.actions);
    CHECK((value_function(in.mdp, pi, in.p) - opt.v).lpNorm<Eigen::Infinity>() < 1e-10);
    // No deterministic policy does better anywhere.
    for (int mask = 0; mask < 8; ++mask) {
        std::vector<int> acts{mask & 1, (mask >> 1) & 1, (mask >> 2) & 1};
        const Vec v = value_function(in.mdp, StationaryPolicy::deterministic(2, acts), in.p);
        CHECK((v - opt.v).minCoeff() >= -1e-10);
    }
}

TEST_CASE("invalid inputs raise structured errors") {
    auto in = random_instance(3, 2, 0.9, 1);
    MdpInstance bad = in.mdp;
    bad.gamma = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    StationaryPolicy wrong = StationaryPolicy::uniform(2, 2);
    try {
        value_function(in.mdp, wrong, in.p);
        FAIL("expected a dimension error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::dimension);
    }
    TransitionKernel off = in.p;
    off(0, 0, 0) += 0.1;
    CHECK_THROWS_AS(off.validate(), Error);
}

TEST_CASE("cost normalization round trip") {
    auto in = random_instance(3, 2, 0.9, 2);
    in.mdp.cost = in.mdp.cost * 20.0 + Mat::Constant(3, 2, 3.0);
    const auto [norm, tr] = normalize_costs(in.mdp);
    CHECK(norm.cost.minCoeff() == doctest::Approx(0.0));
    CHECK(norm.cost.maxCoeff() == doctest::Approx(1.0));
    const double v = weighted_value(in.mdp, in.pi, in.p, in.mdp.rho);
    const double vn = weighted_value(norm, in.pi, in.p, norm.rho);
    CHECK(tr.restore_value(vn, 0.9) == doctest::Approx(v).epsilon(1e-12));
}
