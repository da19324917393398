#include "problem.hpp"

#include "rmdp/mle.hpp"

namespace rmdp::cli {

MachineMap parse_machine_map(const std::string& name) {
    if (name == "dof5") return MachineMap::dof5;
    if (name == "dof25") return MachineMap::dof25;
    throw UsageError("unknown machine map '" + name + "' (expected dof5 or dof25)");
}

Problem build_problem(const EnvOptions& env, std::uint64_t seed) {
    Problem p;
    if (env.name == "gridworld") {
        GridWorldSpec spec;
        spec.side = env.side;
        if (env.gamma) spec.gamma = *env.gamma;
        auto grid = build_gridworld(spec);
        p.mdp = grid.mdp;
        p.nominal = grid.p_ref;
        p.policy = StationaryPolicy::uniform(p.mdp.S(), p.mdp.A());
        p.meta = {{"env", "gridworld"}, {"side", spec.side}, {"gamma", spec.gamma},
                  {"state_order", "row-major from the top-left goal cell"}};
        p.grid = std::move(grid);
    } else if (env.name == "garnet") {
        GarnetSpec spec;
        spec.num_states = env.states;
        spec.num_actions = env.actions;
        spec.branching = env.branching;
        spec.seed = seed;
        if (env.gamma) spec.gamma = *env.gamma;
        auto ga = build_garnet(spec);
        p.mdp = ga.mdp;
        p.nominal = ga.p_ref;
        p.policy = ga.policy;
        p.meta = {{"env", "garnet"}, {"S", spec.num_states}, {"A", spec.num_actions}, {"b", spec.branching},
                  {"gamma", spec.gamma}, {"seed", seed}, {"weights", "flat Dirichlet on the support"}};
    } else if (env.name == "machine") {
        MachineReplacementSpec spec;
        spec.map = parse_machine_map(env.map);
        if (!env.kernel_file.empty()) spec.kernel_file = env.kernel_file;
        auto mr = build_machine_replacement(spec);
        if (env.gamma) mr.mdp.gamma = *env.gamma;
        p.mdp = mr.mdp;
        p.nominal = mr.p0;
        p.policy = mr.exploration;
        p.meta = {{"env", "machine"}, {"map", env.map}, {"gamma", mr.mdp.gamma}, {"provenance", mr.provenance},
                  {"state_order", "operative 1..8, R1, R2"}};
        p.machine = std::move(mr);
    } else if (env.name == "file") {
        if (env.mdp_file.empty()) throw UsageError("--env file needs --mdp-file");
        auto loaded = mdp_from_json(read_json_file(env.mdp_file));
        p.mdp = std::move(loaded.mdp);
        if (env.gamma) p.mdp.gamma = *env.gamma;
        p.nominal = std::move(loaded.kernel);
        p.policy = StationaryPolicy::uniform(p.mdp.S(), p.mdp.A());
        p.meta = {{"env", "file"}, {"path", env.mdp_file}};
    } else {
        throw UsageError("unknown environment '" + env.name + "'");
    }
    p.mdp.validate();
    return p;
}

UncertaintySet build_set(const Problem& problem, const SetOptions& opts, std::uint64_t seed) {
    const auto& k = opts.kind;
    if (k == "singleton") return Singleton{problem.nominal};
    if (k == "sa-l2") return SaRectL2{problem.nominal, opts.radius};
    if (k == "s-l1") return SRectL1{problem.nominal, opts.radius};
    if (k == "file") {
        if (opts.set_file.empty()) throw UsageError("--set file needs --set-file");
        return set_from_json(read_json_file(opts.set_file));
    }
    if (k == "ellipsoid") {
        if (problem.grid) return gridworld_ellipsoid(*problem.grid, opts.radius);
        if (problem.machine) {
            const auto& mr = *problem.machine;
            const History h = sample_history(mr.mdp, mr.p0, mr.exploration, opts.samples, derive_seed(seed, 1));
            ConfidenceOptions c;
            c.alpha = opts.alpha;
            c.dof = opts.dof;
            return confidence_ellipsoid(mr.map, mr.region, h, c);
        }
        throw UsageError("--set ellipsoid is defined for gridworld and machine only; use --set file");
    }
    throw UsageError("unknown uncertainty set '" + k + "'");
}

StationaryPolicy resolve_policy(const Problem& problem, const std::string& spec) {
    if (spec == "env") return problem.policy;
    if (spec == "uniform") return StationaryPolicy::uniform(problem.mdp.S(), problem.mdp.A());
    const Json j = read_json_file(spec);
    const Json& rows = j.contains("pi") ? j.at("pi") : j;
    StationaryPolicy pi{Mat(problem.mdp.S(), problem.mdp.A())};
    if (rows.size() != static_cast<std::size_t>(problem.mdp.S()))
        fail(ErrorKind::dimension, "policy file has the wrong number of states");
    for (int s = 0; s < problem.mdp.S(); ++s) {
        if (rows[s].size() != static_cast<std::size_t>(problem.mdp.A()))
            fail(ErrorKind::dimension, "policy file has the wrong number of actions");
        for (int a = 0; a < problem.mdp.A(); ++a) pi.pi(s, a) = rows[s][a].get<double>();
    }
    pi.validate(1e-9);
    return pi;
}

Json policy_to_json(const StationaryPolicy& policy) {
    Json rows = Json::array();
    for (int s = 0; s < policy.S(); ++s) {
        Json row = Json::array();
        for (int a = 0; a < policy.A(); ++a) row.push_back(policy.pi(s, a));
        rows.push_back(std::move(row));
    }
    return {{"pi", rows}};
}

}  // namespace rmdp::cli
