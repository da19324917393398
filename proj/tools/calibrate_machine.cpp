// Recomputes the embedded machine-replacement coordinate: the repair-to-R1 probability at which the
// non-robust optimal value of the default kernel equals the target.

#include "rmdp/environments.hpp"
#include "rmdp/mdp_core.hpp"

#include "CLI11.hpp"

#include <boost/math/tools/roots.hpp>

#include <cstdio>

using namespace rmdp;

int main(int argc, char** argv) {
    CLI::App app{"Calibrate the embedded machine-replacement kernel"};
    double target = 5.98;
    int grid = 1000;
    app.add_option("--target", target, "non-robust optimal value to match")->capture_default_str();
    app.add_option("--grid", grid, "scan resolution on [0, 1]")->capture_default_str()->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    const auto mr = build_machine_replacement();
    const auto map = machine_map(MachineMap::dof25);
    auto value = [&](double x) {
        const TransitionKernel p = map.kernel(machine_default_xi(x));
        return mr.mdp.rho.dot(optimal_values(mr.mdp, p).v) - target;
    };

    // Scan for sign changes, then refine each bracket.
    int found = 0;
    double prev_x = 0.0, prev_f = value(0.0);
    for (int i = 1; i <= grid; ++i) {
        const double x = static_cast<double>(i) / grid;
        const double f = value(x);
        if ((prev_f <= 0.0) != (f <= 0.0)) {
            boost::uintmax_t iters = 200;
            const auto [lo, hi] = boost::math::tools::toms748_solve(
                value, prev_x, x, prev_f, f, boost::math::tools::eps_tolerance<double>(52), iters);
            const double root = 0.5 * (lo + hi);
            std::printf("repair_to_r1 = %.17g  value = %.12f\n", root, value(root) + target);
            ++found;
        }
        prev_x = x;
        prev_f = f;
    }
    std::printf("embedded coordinate %.17g gives %.12f\n", machine_calibrated_repair_prob(),
                value(machine_calibrated_repair_prob()) + target);
    if (!found) {
        std::fprintf(stderr, "no coordinate in [0, 1] attains %.6g\n", target);
        return 2;
    }
    return 0;
}
