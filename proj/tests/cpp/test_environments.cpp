#include "doctest.h"
#include "support.hpp"

#include "rmdp/environments.hpp"
#include "rmdp/io.hpp"

#include <filesystem>

using namespace rmdp;
using namespace testing;

TEST_CASE("gridworld kernel rules") {
    const auto g = build_gridworld();
    CHECK(g.mdp.S() == 25);
    CHECK(g.mdp.A() == 4);
    g.p_ref.validate();
    // Interior cell 12 (row 2, col 2), action up: cell 7 gets 0.7, 11, 13, 17 get 0.1.
    CHECK(g.p_ref(12, 0, 7) == doctest::Approx(0.7));
    for (int n : {11, 13, 17}) CHECK(g.p_ref(12, 0, n) == doctest::Approx(0.1));
    CHECK(g.p_ref(12, 0, 12) == doctest::Approx(0.0));
    // Corner 0 pointing up (off-grid): neighbors 1 and 5 get 0.1 each, self 0.8.
    CHECK(g.p_ref(0, 0, 1) == doctest::Approx(0.1));
    CHECK(g.p_ref(0, 0, 5) == doctest::Approx(0.1));
    CHECK(g.p_ref(0, 0, 0) == doctest::Approx(0.8));
    CHECK(g.mdp.cost(0, 0) == 0.0);
    CHECK(g.mdp.cost(24, 2) == 10.0);
    CHECK(g.mdp.cost(7, 1) == doctest::Approx(0.2));
    // Irreducible under the uniform policy.
    Mat pp = policy_kernel(StationaryPolicy::uniform(25, 4), g.p_ref);
    Mat acc = pp;
    for (int k = 0; k < 10; ++k) acc = acc * pp;
    CHECK(acc.minCoeff() > 0.0);
    GridWorldSpec bad;
    bad.side = 1;
    CHECK_THROWS_AS(build_gridworld(bad), Error);
}

TEST_CASE("gridworld ellipsoid") {
    const auto g = build_gridworld();
    const auto e = gridworld_ellipsoid(g, 10.0);
    CHECK(e.map.q() == 2400);
    CHECK(e.h.is_diagonal());
    CHECK(e.h.diag()[0] == 1.0);
    CHECK(e.h.diag()[2399] == 2400.0);
    CHECK((e.map.kernel(e.center).matrix() - g.p_ref.matrix()).norm() < 1e-14);
}

TEST_CASE("garnet") {
    GarnetSpec s;
    s.num_states = 5;
    s.num_actions = 3;
    s.seed = 4;
    const auto a = build_garnet(s);
    const auto b = build_garnet(s);
    CHECK(a.p_ref.matrix() == b.p_ref.matrix());
    CHECK(a.mdp.cost == b.mdp.cost);
    CHECK(a.policy.pi == b.policy.pi);
    CHECK(a.p_ref.matrix().minCoeff() > 0.0);
    CHECK(a.mdp.cost.minCoeff() >= 0.0);
    CHECK(a.mdp.cost.maxCoeff() <= 1.0);
    s.branching = 0.4;
    const auto sparse = build_garnet(s);
    for (int r = 0; r < 15; ++r) CHECK((sparse.p_ref.matrix().row(r).array() > 0).count() == 2);

    GarnetSpec big;
    big.num_states = 100;
    big.num_actions = 10;
    const auto gb = build_garnet(big);
    CHECK(weighted_value(gb.mdp, gb.policy, gb.p_ref, Vec::Constant(100, 0.01)) ==
          doctest::Approx(1.261690925199335).epsilon(1e-12));
}

TEST_CASE("machine replacement") {
    for (auto which : {MachineMap::dof5, MachineMap::dof25}) {
        const auto mr = build_machine_replacement({which, std::nullopt});
        CHECK(mr.mdp.S() == 10);
        CHECK(mr.mdp.gamma == 0.8);
        Vec costs(10);
        costs << 0, 0, 0, 0, 0, 0, 0, 20, 2, 10;
        CHECK(mr.mdp.cost.col(0) == costs);
        CHECK(mr.exploration.pi(2, 0) == doctest::Approx(0.8));
        CHECK(mr.exploration.pi(2, 1) == doctest::Approx(0.2));
        CHECK(mr.map.q() == (which == MachineMap::dof5 ? 5 : 25));
        REQUIRE(mr.xi0.has_value());
        CHECK((mr.map.kernel(*mr.xi0).matrix() - mr.p0.matrix()).norm() < 1e-14);
        const auto opt = optimal_values(mr.mdp, mr.p0);
        CHECK(mr.mdp.rho.dot(opt.v) == doctest::Approx(5.98).epsilon(1e-9));
        // Every box corner maps to a valid kernel.
        std::mt19937_64 rng(1);
        for (int k = 0; k < 20; ++k) {
            Vec xi(mr.map.q());
            for (int i = 0; i < xi.size(); ++i) xi[i] = static_cast<double>(rng() & 1);
            CHECK(mr.map.kernel(xi).stochasticity_residual() <= 1e-12);
        }
    }
    CHECK((machine_lift(machine_map(MachineMap::dof5).coordinates(build_machine_replacement({MachineMap::dof5, {}}).p0)) -
           machine_default_xi())
              .norm() < 1e-12);
}

TEST_CASE("machine replacement kernel file overrides the default") {
    auto mr = build_machine_replacement();
    TransitionKernel alt = mr.p0;
    alt.row(0, 0) << 0.5, 0.5, 0, 0, 0, 0, 0, 0, 0, 0;
    const auto path = (std::filesystem::temp_directory_path() / "rmdp_machine_kernel.json").string();
    write_json_file(path, kernel_to_json(alt));
    const auto loaded = build_machine_replacement({MachineMap::dof25, path});
    CHECK(loaded.p0.matrix() == alt.matrix());
    CHECK(loaded.provenance == "file:" + path);
    Json bad = kernel_to_json(alt);
    bad[0][0][0] = 0.9;
    write_json_file(path, bad);
    CHECK_THROWS_AS(build_machine_replacement({MachineMap::dof25, path}), Error);
    std::filesystem::remove(path);
}

TEST_CASE("history sampling") {
    auto in = random_instance(3, 2, 0.9, 5);
    const auto one = sample_history(in.mdp, in.p, in.pi, 1, 0);
    CHECK(one.size() == 1);
    CHECK(sample_history(in.mdp, in.p, in.pi, 50, 7) == sample_history(in.mdp, in.p, in.pi, 50, 7));

    TransitionKernel det(3, 1);
    det(0, 0, 1) = det(1, 0, 2) = det(2, 0, 0) = 1.0;
    MdpInstance m = in.mdp;
    m.num_actions = 1;
    m.cost = Mat::Zero(3, 1);
    m.rho = Vec::Unit(3, 2);
    const auto h = sample_history(m, det, StationaryPolicy::uniform(3, 1), 5, 3);
    const std::vector<int> want{2, 0, 1, 2, 0};
    for (int t = 0; t < 5; ++t) CHECK(h[t].s == want[t]);

    const auto big = sample_history(in.mdp, in.p, in.pi, 1000000, 11);
    RowMat counts = RowMat::Zero(6, 3);
    for (std::size_t t = 0; t + 1 < big.size(); ++t) counts(big[t].s * 2 + big[t].a, big[t + 1].s) += 1.0;
    for (int r = 0; r < 6; ++r) {
        const double n = counts.row(r).sum();
        if (n == 0) continue;
        CHECK((counts.row(r) / n - in.p.matrix().row(r)).lpNorm<Eigen::Infinity>() <= 0.005);
    }
    CHECK_THROWS_AS(sample_history(in.mdp, in.p, in.pi, 0, 0), Error);
}
