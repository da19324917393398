#include "doctest.h"
#include "support.hpp"

#include "rmdp/diagnostics.hpp"
#include "rmdp/environments.hpp"
#include "rmdp/robust_eval.hpp"

using namespace rmdp;
using namespace testing;

namespace {

void check_cpi_mechanics(const CpiResult& r, double gamma, double eps) {
    REQUIRE(!r.checks.empty());
    double kernel_excess = -1e300, visit_excess = -1e300, worst_increase = 1e300, lemma_excess = -1e300;
    const double c = std::pow(1 - gamma, 4) / (8 * gamma * gamma);
    for (const auto& k : r.checks) {
        kernel_excess = std::max(kernel_excess, k.kernel_drift - 2 * k.alpha);
        visit_excess = std::max(visit_excess, k.visitation_drift - 2 * k.alpha * gamma / (1 - gamma));
        worst_increase = std::min(worst_increase, k.value_increase);
        if (!k.clamped) lemma_excess = std::max(lemma_excess, k.gap * k.gap * c - k.value_increase);
    }
    CHECK(kernel_excess <= 1e-12);
    CHECK(visit_excess <= 1e-9);
    CHECK(worst_increase >= -1e-12);
    CHECK(lemma_excess <= 1e-8);
    if (r.trace.termination == "gap") CHECK(r.iterations <= cpi_iteration_bound(gamma, eps));
    bool increasing = true;
    for (std::size_t i = 1; i < r.trace.records.size(); ++i)
        increasing = increasing && r.trace.records[i].iter > r.trace.records[i - 1].iter;
    CHECK(increasing);
}

/// Brute force per-(s,a) inner max over a polar grid of the l2 disk in the row's plane (S = 3),
/// intersected with the simplex.
double discretized_robust_value(const Instance& in, double radius, int radii, int angles) {
    const int S = 3, A = in.mdp.A();
    const double gamma = in.mdp.gamma;
    Vec e1(3), e2(3);
    e1 << 1.0, -1.0, 0.0;
    e2 << 1.0, 1.0, -2.0;
    e1 /= e1.norm();
    e2 /= e2.norm();
    std::vector<std::vector<Vec>> cands(S * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            for (int i = 1; i <= radii; ++i)
                for (int j = 0; j < angles; ++j) {
                    const double rr = radius * i / radii, t = 2.0 * M_PI * j / angles;
                    const Vec p = in.p.row(s, a).transpose() + rr * (std::cos(t) * e1 + std::sin(t) * e2);
                    if (p.minCoeff() >= 0.0) cands[s * A + a].push_back(p);
                }
    Vec v = Vec::Zero(S);
    for (int it = 0; it < 5000; ++it) {
        Vec next(S);
        for (int s = 0; s < S; ++s) {
            double acc = 0.0;
            for (int a = 0; a < A; ++a) {
                double best = -1e300;
                for (const auto& p : cands[s * A + a]) best = std::max(best, p.dot(v));
                acc += in.pi.pi(s, a) * (in.mdp.cost(s, a) + gamma * best);
            }
            next[s] = acc;
        }
        const double change = (next - v).lpNorm<Eigen::Infinity>();
        v = next;
        if (change < 1e-13) break;
    }
    return in.mdp.rho.dot(v);
}

}  // namespace

TEST_CASE("robust value iteration") {
    auto in = random_instance(3, 2, 0.9, 14);
    const Vec exact = value_function(in.mdp, in.pi, in.p);
    SUBCASE("degenerate sets reduce to policy evaluation") {
        CHECK((robust_vi_evaluate(in.mdp, in.pi, Singleton{in.p}, 1e-10).v - exact).lpNorm<Eigen::Infinity>() <= 1e-10);
        CHECK((robust_vi_evaluate(in.mdp, in.pi, SaRectL2{in.p, 0.0}, 1e-10).v - exact).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
    SUBCASE("matches a discretized inner maximization") {
        const double vi = in.mdp.rho.dot(robust_vi_evaluate(in.mdp, in.pi, SaRectL2{in.p, 0.1}, 1e-8).v);
        const double brute = discretized_robust_value(in, 0.1, 100, 100);
        CHECK(std::abs(vi - brute) <= 1e-3);
        CHECK(vi >= brute - 1e-9);
    }
    SUBCASE("worst kernel attains the robust value") {
        UncertaintySet set = SRectL1{in.p, 0.3};
        const auto r = robust_vi_evaluate(in.mdp, in.pi, set, 1e-10);
        CHECK(membership(set, r.worst, 1e-9).inside);
        CHECK((value_function(in.mdp, in.pi, r.worst) - r.v).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
    SUBCASE("non-rectangular sets are rejected") {
        auto g = build_gridworld();
        CHECK_THROWS_AS(robust_vi_evaluate(g.mdp, StationaryPolicy::uniform(25, 4), gridworld_ellipsoid(g, 1.0), 1e-6),
                        Error);
    }
}

TEST_CASE("CPI") {
    SUBCASE("singleton stops at once") {
        auto in = random_instance(3, 2, 0.9, 1);
        CpiParams p;
        p.eps = 1e-6;
        const auto r = cpi_evaluate(in.mdp, in.pi, Singleton{in.p}, p, in.mdp.rho);
        CHECK(r.iterations == 0);
        CHECK(r.final_gap <= p.eps);
        CHECK(r.kernel.matrix() == in.p.matrix());
        CHECK(r.value == doctest::Approx(weighted_value(in.mdp, in.pi, in.p, in.mdp.rho)).epsilon(1e-14));
    }
    SUBCASE("rectangular optimality and mechanics on a 2-state instance") {
        auto in = random_instance(2, 2, 0.5, 17);
        UncertaintySet set = SaRectL2{in.p, 0.05};
        CpiParams p;
        p.eps = 1e-4;
        p.lmo_eps = 1e-10;
        p.record_checks = true;
        const auto r = cpi_evaluate(in.mdp, in.pi, set, p, in.mdp.rho);
        const double ref = in.mdp.rho.dot(robust_vi_evaluate(in.mdp, in.pi, set, 1e-11).v);
        const double dd = mismatch_coefficient(set, in.pi, in.mdp, 200, 0).value;
        CHECK(r.trace.termination == "gap");
        CHECK(r.value >= ref - (2 * dd * p.eps + 1e-6));
        CHECK(r.value <= ref + 1e-6);
        check_cpi_mechanics(r, 0.5, p.eps);
    }
    SUBCASE("iteration cap is honored") {
        auto g = build_gridworld();
        CpiParams p;
        p.max_iters = 5;
        const auto r = cpi_evaluate(g.mdp, StationaryPolicy::uniform(25, 4), SaRectL2{g.p_ref, 1.0}, p, g.mdp.rho);
        CHECK(r.iterations == 5);
        CHECK(r.trace.termination == "cap");
    }
    SUBCASE("iteration bound formula") {
        // Exact value 6.48e9; rounding of the floating-point quotient may add one.
        const long long b = cpi_iteration_bound(0.9, 1e-2);
        CHECK(b >= 6480000000LL);
        CHECK(b <= 6480000001LL);
    }
    SUBCASE("invalid tolerance") {
        CpiParams p;
        p.eps = 0.0;
        CHECK_THROWS_AS(p.validate(), Error);
    }
}

TEST_CASE("PLD") {
    SUBCASE("singleton") {
        auto in = random_instance(3, 2, 0.9, 2);
        PldParams p;
        p.iters = 20;
        const auto r = pld_evaluate(in.mdp, in.pi, Singleton{in.p}, p, in.mdp.rho);
        CHECK((r.kernel.matrix() - in.p.matrix()).norm() < 1e-15);
        CHECK(r.value == doctest::Approx(weighted_value(in.mdp, in.pi, in.p, in.mdp.rho)));
    }
    SUBCASE("one parameter set with the maximum at the boundary") {
        // State 0 costs 1, state 1 costs 0; xi = P(0|s) for both states, so V increases in xi.
        EllipsoidParam e;
        e.map.num_states = 2;
        e.map.num_actions = 1;
        e.map.base = RowMat::Zero(2, 2);
        e.map.base(0, 1) = e.map.base(1, 1) = 1.0;
        e.map.jacobian.resize(4, 1);
        e.map.jacobian.insert(0, 0) = 1.0;
        e.map.jacobian.insert(1, 0) = -1.0;
        e.map.jacobian.insert(2, 0) = 1.0;
        e.map.jacobian.insert(3, 0) = -1.0;
        e.center = Vec::Constant(1, 0.5);
        e.h = QuadraticForm::diagonal(Vec::Ones(1));
        e.radius = 1.0;
        e.region = ParamRegion::box(1, 0.0, 1.0);
        MdpInstance m;
        m.num_states = 2;
        m.num_actions = 1;
        m.gamma = 0.9;
        m.cost = Mat(2, 1);
        m.cost << 1.0, 0.0;
        m.rho = Vec::Constant(2, 0.5);
        const auto pi = StationaryPolicy::uniform(2, 1);
        double grid_best = -1e300, grid_arg = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            Vec x(1);
            x << i / 1000.0;
            const double v = weighted_value(m, pi, e.map.kernel(x), m.rho);
            if (v > grid_best) grid_best = v, grid_arg = x[0];
        }
        CHECK(grid_arg == 1.0);
        PldParams p;
        p.beta = 1e3;
        p.eta = 0.01;
        p.iters = 2000;
        p.seed = 0;
        const auto r = pld_evaluate(m, pi, e, p, m.rho);
        CHECK(std::abs(r.xi[0] - grid_arg) <= 0.05);
    }
    SUBCASE("iterates stay feasible and runs are reproducible") {
        auto g = build_gridworld();
        UncertaintySet set = gridworld_ellipsoid(g, 1.0);
        PldParams p;
        p.iters = 20;
        p.seed = 42;
        const auto pi = StationaryPolicy::uniform(25, 4);
        const auto a = pld_evaluate(g.mdp, pi, set, p, g.mdp.rho);
        const auto b = pld_evaluate(g.mdp, pi, set, p, g.mdp.rho);
        CHECK(a.xi == b.xi);
        CHECK(a.value == b.value);
        CHECK(param_membership(set, a.xi, 1e-9).inside);
        CHECK(a.value >= a.trace.records.front().value);
        double best = -1e300;
        for (const auto& rec : a.trace.records) best = std::max(best, rec.value);
        CHECK(a.value == best);
        p.seed = 43;
        CHECK(pld_evaluate(g.mdp, pi, set, p, g.mdp.rho).value != a.value);
    }
    SUBCASE("kernel-space sets use the identity embedding") {
        auto in = random_instance(3, 2, 0.9, 5);
        UncertaintySet set = SaRectL2{in.p, 0.1};
        PldParams p;
        p.iters = 50;
        const auto r = pld_evaluate(in.mdp, in.pi, set, p, in.mdp.rho);
        CHECK(membership(set, r.kernel, 1e-9).inside);
        const double ref = in.mdp.rho.dot(robust_vi_evaluate(in.mdp, in.pi, set, 1e-10).v);
        CHECK(r.value <= ref + 1e-9);
    }
    SUBCASE("parameter validation") {
        PldParams p;
        p.beta = 1.0;
        CHECK_THROWS_AS(p.validate(), Error);
        p.beta = 2.0;
        p.iters = 0;
        CHECK_THROWS_AS(p.validate(), Error);
    }
}

TEST_CASE("projected gradient baseline") {
    SUBCASE("singleton is a fixed point") {
        auto in = random_instance(3, 2, 0.9, 3);
        const auto r = pgd_baseline_evaluate(in.mdp, in.pi, Singleton{in.p}, {}, in.mdp.rho);
        CHECK(r.iterations <= 1);
        CHECK(r.value == doctest::Approx(weighted_value(in.mdp, in.pi, in.p, in.mdp.rho)));
    }
    SUBCASE("agrees with CPI on a small rectangular instance") {
        auto in = random_instance(2, 2, 0.5, 17);
        UncertaintySet set = SaRectL2{in.p, 0.05};
        CpiParams cp;
        cp.eps = 1e-4;
        const double cpi = cpi_evaluate(in.mdp, in.pi, set, cp, in.mdp.rho).value;
        const double pgd = pgd_baseline_evaluate(in.mdp, in.pi, set, {}, in.mdp.rho).value;
        CHECK(std::abs(pgd - cpi) / cpi <= 0.025);
    }
    SUBCASE("garnet S = 20") {
        GarnetSpec gs;
        gs.num_states = 20;
        gs.num_actions = 5;
        const auto ga = build_garnet(gs);
        UncertaintySet set = SRectL1{ga.p_ref, 5.0};
        const Vec w = Vec::Constant(20, 1.0 / 20);
        CpiParams cp;
        cp.eps = 1e-3;
        cp.max_iters = 20000;
        const double cpi = cpi_evaluate(ga.mdp, ga.policy, set, cp, w).value;
        const auto pgd = pgd_baseline_evaluate(ga.mdp, ga.policy, set, {}, w);
        const double ref = w.dot(robust_vi_evaluate(ga.mdp, ga.policy, set, 1e-10).v);
        // With the default stepsize (1-gamma)^3/(2 gamma S^2) the value change per step is far
        // below the stopping threshold, so the baseline halts next to the nominal value.
        CHECK(pgd.iterations <= 2);
        CHECK(pgd.value == doctest::Approx(weighted_value(ga.mdp, ga.policy, ga.p_ref, w)).epsilon(1e-4));
        CHECK(cpi >= pgd.value);
        CHECK(std::abs(cpi - ref) <= 2e-3);
    }
    SUBCASE("ellipsoids are rejected") {
        auto g = build_gridworld();
        CHECK_THROWS_AS(pgd_baseline_evaluate(g.mdp, StationaryPolicy::uniform(25, 4), gridworld_ellipsoid(g, 1.0), {},
                                              g.mdp.rho),
                        Error);
    }
}
