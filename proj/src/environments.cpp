#include "rmdp/environments.hpp"

#include "rmdp/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rmdp {

// ---------------------------------------------------------------------------
// GridWorld

void GridWorldSpec::validate() const {
    if (side < 2) fail(ErrorKind::validation, "GridWorld side must be at least 2");
    if (!(move_prob >= 0.0 && slip_prob >= 0.0)) fail(ErrorKind::validation, "GridWorld probabilities must be nonnegative");
    // Worst case: interior cell with the intended neighbour plus three slips.
    if (move_prob + 3.0 * slip_prob > 1.0 + 1e-12 || 4.0 * slip_prob > 1.0 + 1e-12)
        fail(ErrorKind::validation, "GridWorld neighbour probabilities exceed one");
    if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorKind::validation, "discount must lie in (0,1)");
}

GridWorld build_gridworld(const GridWorldSpec& spec) {
    spec.validate();
    const int n = spec.side, S = n * n, A = 4;
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};
    GridWorld g;
    g.mdp.num_states = S;
    g.mdp.num_actions = A;
    g.mdp.gamma = spec.gamma;
    g.mdp.rho = Vec::Constant(S, 1.0 / S);
    g.mdp.cost = Mat::Constant(S, A, spec.step_cost);
    g.mdp.cost.row(0).setConstant(spec.goal_cost);
    g.mdp.cost.row(S - 1).setConstant(spec.bad_cost);
    g.p_ref = TransitionKernel(S, A);
    for (int s = 0; s < S; ++s) {
        const int r = s / n, c = s % n;
        for (int a = 0; a < A; ++a) {
            double neighbours = 0.0;
            for (int d = 0; d < 4; ++d) {
                const int rr = r + dr[d], cc = c + dc[d];
                if (rr < 0 || rr >= n || cc < 0 || cc >= n) continue;
                const double p = d == a ? spec.move_prob : spec.slip_prob;
                g.p_ref(s, a, rr * n + cc) = p;
                neighbours += p;
            }
            g.p_ref(s, a, s) = 1.0 - neighbours;
        }
    }
    g.p_ref.validate();
    return g;
}

EllipsoidParam gridworld_ellipsoid(const GridWorld& grid, double radius) {
    const int S = grid.mdp.S(), A = grid.mdp.A();
    EllipsoidParam e;
    e.map = AffineKernelMap::drop_last(S, A);
    e.center = e.map.coordinates(grid.p_ref);
    const int q = e.map.q();
    e.h = QuadraticForm::diagonal(Vec::LinSpaced(q, 1.0, static_cast<double>(q)));
    e.radius = radius;
    std::vector<std::vector<int>> groups(S * A);
    for (int r = 0; r < S * A; ++r) {
        groups[r].resize(S - 1);
        std::iota(groups[r].begin(), groups[r].end(), r * (S - 1));
    }
    e.region = ParamRegion::solid_simplices(q, groups);
    return e;
}

// ---------------------------------------------------------------------------
// Garnet

void GarnetSpec::validate() const {
    if (num_states < 1 || num_actions < 1) fail(ErrorKind::validation, "Garnet needs positive S and A");
    if (!(branching > 0.0 && branching <= 1.0)) fail(ErrorKind::validation, "Garnet branching must lie in (0,1]");
    if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorKind::validation, "discount must lie in (0,1)");
}

Garnet build_garnet(const GarnetSpec& spec) {
    spec.validate();
    const int S = spec.num_states, A = spec.num_actions;
    const int support = std::max(1, static_cast<int>(std::ceil(spec.branching * S - 1e-12)));
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Garnet g;
    g.mdp.num_states = S;
    g.mdp.num_actions = A;
    g.mdp.gamma = spec.gamma;
    g.mdp.rho = Vec::Constant(S, 1.0 / S);
    g.mdp.cost.resize(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) g.mdp.cost(s, a) = unit(rng);

    g.p_ref = TransitionKernel(S, A);
    std::vector<int> states(S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            std::iota(states.begin(), states.end(), 0);
            // Partial Fisher-Yates: the first `support` entries are a uniform subset.
            for (int i = 0; i < support; ++i) {
                std::uniform_int_distribution<int> pick(i, S - 1);
                std::swap(states[i], states[pick(rng)]);
            }
            // Flat Dirichlet via normalized exponentials.
            double total = 0.0;
            std::vector<double> w(support);
            for (int i = 0; i < support; ++i) {
                w[i] = -std::log1p(-unit(rng));
                total += w[i];
            }
            for (int i = 0; i < support; ++i) g.p_ref(s, a, states[i]) = w[i] / total;
        }
    // Renormalize exactly in floating point.
    for (int r = 0; r < S * A; ++r) g.p_ref.matrix().row(r) /= g.p_ref.matrix().row(r).sum();

    std::uniform_int_distribution<int> ten(1, 10);
    g.policy.pi.resize(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) g.policy.pi(s, a) = ten(rng);
        g.policy.pi.row(s) /= g.policy.pi.row(s).sum();
    }
    g.p_ref.validate();
    return g;
}

// ---------------------------------------------------------------------------
// Machine replacement

namespace {

constexpr int kMachineStates = 10;
constexpr int kOperative = 8;
constexpr int kR1 = 8;
constexpr int kR2 = 9;
constexpr int kDoNothing = 0;
constexpr int kRepair = 1;

// dof25 layout.
constexpr int kAdv1 = 0;        // 0..6: half of it moves one state down
constexpr int kAdv2 = 7;        // 7..13: half of it moves two states down (R2 from state 7)
constexpr int kRepairR1 = 14;   // 14..21: repair in operative state i lands in R1
constexpr int kR1Return = 22;   // R1, do nothing: back to state 1
constexpr int kR2Return = 23;   // R2, repair: half back to state 1
constexpr int kR2ToR1 = 24;     // R2, repair: half to R1
constexpr int kDof25 = 25;

constexpr double kRepairToR1Calibrated = 0.81810368258405552;

int flat_index(int s, int a, int next) { return (s * 2 + a) * kMachineStates + next; }

MdpInstance machine_mdp() {
    MdpInstance mdp;
    mdp.num_states = kMachineStates;
    mdp.num_actions = 2;
    mdp.gamma = 0.8;
    mdp.rho = Vec::Constant(kMachineStates, 1.0 / kMachineStates);
    mdp.cost = Mat::Zero(kMachineStates, 2);
    mdp.cost.row(kOperative - 1).setConstant(20.0);
    mdp.cost.row(kR1).setConstant(2.0);
    mdp.cost.row(kR2).setConstant(10.0);
    return mdp;
}

AffineKernelMap machine_map25() {
    AffineKernelMap m;
    m.num_states = kMachineStates;
    m.num_actions = 2;
    m.base = RowMat::Zero(kMachineStates * 2, kMachineStates);
    std::vector<Eigen::Triplet<double>> t;
    auto add = [&](int s, int a, int next, int param, double coef) { t.emplace_back(flat_index(s, a, next), param, coef); };
    for (int i = 0; i < kOperative - 1; ++i) {
        m.base(i * 2 + kDoNothing, i) = 1.0;
        add(i, kDoNothing, i + 1, kAdv1 + i, 0.5);
        add(i, kDoNothing, i, kAdv1 + i, -0.5);
        // From state 7 the two-step jump would also land in state 8; it is a breakdown into R2 instead.
        add(i, kDoNothing, i + 2 < kOperative ? i + 2 : kR2, kAdv2 + i, 0.5);
        add(i, kDoNothing, i, kAdv2 + i, -0.5);
    }
    m.base((kOperative - 1) * 2 + kDoNothing, kOperative - 1) = 1.0;
    for (int i = 0; i < kOperative; ++i) {
        m.base(i * 2 + kRepair, kR2) = 1.0;
        add(i, kRepair, kR1, kRepairR1 + i, 1.0);
        add(i, kRepair, kR2, kRepairR1 + i, -1.0);
    }
    m.base(kR1 * 2 + kDoNothing, kR1) = 1.0;
    add(kR1, kDoNothing, 0, kR1Return, 1.0);
    add(kR1, kDoNothing, kR1, kR1Return, -1.0);
    m.base(kR1 * 2 + kRepair, 0) = 1.0;
    m.base(kR2 * 2 + kDoNothing, kR2) = 1.0;
    m.base(kR2 * 2 + kRepair, kR2) = 1.0;
    add(kR2, kRepair, 0, kR2Return, 0.5);
    add(kR2, kRepair, kR2, kR2Return, -0.5);
    add(kR2, kRepair, kR1, kR2ToR1, 0.5);
    add(kR2, kRepair, kR2, kR2ToR1, -0.5);
    m.jacobian.resize(kMachineStates * 2 * kMachineStates, kDof25);
    m.jacobian.setFromTriplets(t.begin(), t.end());
    return m;
}

SpMat machine_tie_matrix() {
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < 7; ++i) {
        t.emplace_back(kAdv1 + i, 0, 1.0);
        t.emplace_back(kAdv2 + i, 1, 1.0);
    }
    for (int i = 0; i < kOperative; ++i) t.emplace_back(kRepairR1 + i, 2, 1.0);
    t.emplace_back(kR1Return, 3, 1.0);
    t.emplace_back(kR2Return, 4, 1.0);
    t.emplace_back(kR2ToR1, 4, 1.0);
    SpMat e(kDof25, 5);
    e.setFromTriplets(t.begin(), t.end());
    return e;
}

}  // namespace

void MachineReplacementSpec::validate() const {
    if (kernel_file && kernel_file->empty()) fail(ErrorKind::validation, "machine kernel file path is empty");
}

AffineKernelMap machine_map(MachineMap which) {
    AffineKernelMap m = machine_map25();
    if (which == MachineMap::dof5) m.jacobian = SpMat(m.jacobian * machine_tie_matrix());
    return m;
}

Vec machine_lift(const Vec& xi5) {
    require_dims(xi5.size() == 5, "dof5 parameter must have 5 entries");
    return machine_tie_matrix() * xi5;
}

double machine_calibrated_repair_prob() { return kRepairToR1Calibrated; }

Vec machine_default_xi(std::optional<double> repair_to_r1) {
    Vec xi5(5);
    xi5 << 0.6, 0.4, repair_to_r1.value_or(kRepairToR1Calibrated), 0.8, 0.6;
    return machine_lift(xi5);
}

MachineReplacement build_machine_replacement(const MachineReplacementSpec& spec) {
    spec.validate();
    MachineReplacement out;
    out.mdp = machine_mdp();
    out.map = machine_map(spec.map);
    out.region = ParamRegion::box(out.map.q(), 0.0, 1.0);
    out.exploration.pi.resize(kMachineStates, 2);
    for (int s = 0; s < kOperative - 1; ++s) out.exploration.pi.row(s) << 0.8, 0.2;
    out.exploration.pi.row(kOperative - 1) << 0.0, 1.0;
    out.exploration.pi.row(kR1) << 1.0, 0.0;
    out.exploration.pi.row(kR2) << 0.0, 1.0;

    const Vec xi25 = machine_default_xi();
    if (!spec.kernel_file) {
        out.xi0 = spec.map == MachineMap::dof25 ? xi25 : Vec(xi25(std::vector<int>{kAdv1, kAdv2, kRepairR1, kR1Return, kR2Return}));
        out.p0 = out.map.kernel(*out.xi0);
        out.provenance = "embedded-calibrated";
    } else {
        const Json j = read_json_file(*spec.kernel_file);
        out.p0 = kernel_from_json(j.is_object() ? j.at("kernel") : j, kMachineStates, 2);
        out.provenance = "file:" + *spec.kernel_file;
        const Vec xi = out.map.coordinates(out.p0);
        const double recon = (out.map.kernel(xi).matrix() - out.p0.matrix()).cwiseAbs().maxCoeff();
        if (recon <= 1e-9 && out.region.violation(xi) <= 1e-9) out.xi0 = xi;
    }
    out.p0.validate();
    return out;
}

// ---------------------------------------------------------------------------

History sample_history(const MdpInstance& mdp, const TransitionKernel& kernel, const StationaryPolicy& policy,
                       int n, std::uint64_t seed) {
    if (n < 1) fail(ErrorKind::validation, "history length must be at least 1");
    check_compatible(mdp, kernel);
    check_compatible(mdp, policy);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](const auto& probs, int size) {
        const double u = unit(rng);
        double acc = 0.0;
        int last = 0;
        for (int i = 0; i < size; ++i) {
            if (probs[i] <= 0.0) continue;
            last = i;
            acc += probs[i];
            if (u < acc) return i;
        }
        return last;
    };
    History h;
    h.reserve(n);
    int s = draw(mdp.rho, mdp.S());
    for (int t = 0; t < n; ++t) {
        const int a = draw(policy.pi.row(s), mdp.A());
        h.push_back({s, a});
        if (t + 1 < n) s = draw(kernel.row(s, a), mdp.S());
    }
    return h;
}

}  // namespace rmdp
