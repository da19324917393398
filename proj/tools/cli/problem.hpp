#pragma once

#include "rmdp/environments.hpp"
#include "rmdp/io.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace rmdp::cli {

/// Bad flags or an incompatible combination; maps to exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EnvOptions {
    std::string name = "gridworld";  // gridworld | garnet | machine | file
    int side = 5;
    int states = 20;
    int actions = 5;
    double branching = 1.0;
    std::optional<double> gamma;
    std::string map = "dof25";
    std::string kernel_file;
    std::string mdp_file;
};

struct SetOptions {
    std::string kind = "singleton";  // singleton | sa-l2 | s-l1 | ellipsoid | file
    double radius = 0.0;
    std::string set_file;
    int samples = 2500;  // history length behind the machine confidence ellipsoid
    double alpha = 0.2;
    int dof = 0;
};

struct Problem {
    MdpInstance mdp;
    TransitionKernel nominal;
    StationaryPolicy policy;  // the environment's own evaluation policy
    std::optional<GridWorld> grid;
    std::optional<MachineReplacement> machine;
    Json meta;
};

MachineMap parse_machine_map(const std::string& name);

Problem build_problem(const EnvOptions& env, std::uint64_t seed);

/// The machine ellipsoid is built from a history drawn with derive_seed(seed, 1).
UncertaintySet build_set(const Problem& problem, const SetOptions& opts, std::uint64_t seed);

/// "env" (the environment's policy), "uniform", or a JSON file holding an S x A matrix.
StationaryPolicy resolve_policy(const Problem& problem, const std::string& spec);

Json policy_to_json(const StationaryPolicy& policy);

}  // namespace rmdp::cli
