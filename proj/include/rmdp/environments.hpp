#pragma once

// Benchmark environments: stochastic GridWorld, Garnet random MDPs and machine replacement.

#include "rmdp/uncertainty.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace rmdp {

struct GridWorldSpec {
    int side = 5;
    double move_prob = 0.7;
    double slip_prob = 0.1;
    double bad_cost = 10.0;
    double goal_cost = 0.0;
    double step_cost = 0.2;
    double gamma = 0.9;
    void validate() const;
};

struct GridWorld {
    MdpInstance mdp;
    TransitionKernel p_ref;
};

/// Cells are numbered row-major from the top-left corner (index 0, the goal) to the
/// bottom-right corner (index side^2 - 1, the bad state). Actions: 0 up, 1 down, 2 left, 3 right.
GridWorld build_gridworld(const GridWorldSpec& spec = {});

/// Ellipsoidal set around the GridWorld reference: drop-last parameterization with
/// H = diag(1, 2, ..., (S-1) S A) and each kernel row kept on the simplex.
EllipsoidParam gridworld_ellipsoid(const GridWorld& grid, double radius);

struct GarnetSpec {
    int num_states = 20;
    int num_actions = 5;
    double branching = 1.0;  // fraction of states reachable from each (s, a)
    double gamma = 0.6;
    std::uint64_t seed = 0;
    void validate() const;
};

struct Garnet {
    MdpInstance mdp;
    TransitionKernel p_ref;
    StationaryPolicy policy;  // pi(a|s) proportional to integers drawn from {1..10}
};

/// Support of ceil(b S) next states per (s,a) without replacement, flat Dirichlet weights,
/// costs uniform on [0,1]. Deterministic in the seed.
Garnet build_garnet(const GarnetSpec& spec);

enum class MachineMap { dof5, dof25 };

struct MachineReplacementSpec {
    MachineMap map = MachineMap::dof25;
    std::optional<std::string> kernel_file;  // JSON kernel overriding the embedded default
    void validate() const;
};

struct MachineReplacement {
    MdpInstance mdp;
    AffineKernelMap map;       // dof5 or dof25 structural map
    ParamRegion region;        // unit hypercube
    TransitionKernel p0;       // data-generating kernel
    std::optional<Vec> xi0;    // its parameter when p0 lies in the image of the map
    StationaryPolicy exploration;
    std::string provenance;    // "embedded-calibrated" or "file:<path>"
};

/// States 0..7 are the operative states 1..8, 8 is R1 and 9 is R2. Actions: 0 do nothing, 1 repair.
MachineReplacement build_machine_replacement(const MachineReplacementSpec& spec = {});

/// Embedded default parameter in dof25 coordinates (the value calibrated against the
/// non-robust optimum). `repair_to_r1` overrides the calibrated coordinate.
Vec machine_default_xi(std::optional<double> repair_to_r1 = std::nullopt);
AffineKernelMap machine_map(MachineMap which);
/// Lifts a dof5 parameter to dof25 coordinates.
Vec machine_lift(const Vec& xi5);
/// The coordinate of the embedded default that is tuned by the calibration tool.
double machine_calibrated_repair_prob();

/// s0 ~ rho, then a_t ~ pi(.|s_t) and s_{t+1} ~ P(.|s_t, a_t); returns n pairs.
History sample_history(const MdpInstance& mdp, const TransitionKernel& kernel, const StationaryPolicy& policy,
                       int n, std::uint64_t seed);

}  // namespace rmdp
