#include "output.hpp"
#include "presets.hpp"
#include "problem.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <thread>

using namespace rmdp;
using namespace rmdp::cli;

namespace {

constexpr int kUsage = 1;
constexpr int kSolver = 2;
constexpr int kValidation = 3;

struct Globals {
    std::string out = ".";
    bool out_given = false;
    std::uint64_t seed = 0;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string format = "csv";
    bool no_timing = false;

    Format fmt() const { return parse_format(format); }
};

struct EvalOptions {
    EnvOptions env;
    SetOptions set;
    std::string algo;
    std::string policy = "env";
    PldParams pld;
    double eps = 1e-2;
    long long max_iters = 20000;
    double lmo_eps = 0.0;
    double pgd_step = 0.0;
    double pgd_value_tol = 2e-5;
    long long pgd_max_iters = 1000000;
    double vi_tol = 1e-9;
};

struct ImproveOptions {
    EnvOptions env;
    SetOptions set;
    int iters = 100;
    std::optional<double> eta;
    std::string critic = "pld";
    PldParams pld{450.0, 0.07, 50};
    std::optional<double> critic_eps;
    long long critic_cap = 20000;
    double exact_tol = 1e-8;
    bool ascent = false;
    bool warm_start = false;
    std::string select = "best";
    std::string eval_kernel;
};

struct PresetOptions {
    std::string name;
    bool full = false;
    std::vector<std::string> params;
    std::string manifest;
};

void configure_logging() {
    spdlog::set_default_logger(spdlog::stderr_color_mt("rmdp"));
    spdlog::set_pattern("[%l] %v");
    const char* env = std::getenv("ROBUST_MDP_LOG");
    const std::string level = env ? env : "info";
    if (level == "error") {
        spdlog::set_level(spdlog::level::err);
    } else if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else {
        spdlog::set_level(spdlog::level::info);
        if (level != "info") spdlog::warn("ROBUST_MDP_LOG={} not recognized; using info", level);
    }
}

void add_env_options(CLI::App* cmd, EnvOptions& env) {
    cmd->add_option("--env", env.name, "gridworld, garnet, machine or file")
        ->check(CLI::IsMember({"gridworld", "garnet", "machine", "file"}))
        ->capture_default_str();
    cmd->add_option("--side", env.side, "GridWorld side length")->capture_default_str();
    cmd->add_option("--S", env.states, "Garnet states")->capture_default_str();
    cmd->add_option("--A", env.actions, "Garnet actions")->capture_default_str();
    cmd->add_option("--b", env.branching, "Garnet branching fraction")->capture_default_str();
    cmd->add_option("--gamma", env.gamma, "override the discount factor");
    cmd->add_option("--map", env.map, "machine structural map: dof5 or dof25")->capture_default_str();
    cmd->add_option("--kernel-file", env.kernel_file, "machine data-generating kernel (JSON)");
    cmd->add_option("--mdp-file", env.mdp_file, "MDP with kernel (JSON) for --env file");
}

void add_set_options(CLI::App* cmd, SetOptions& set) {
    cmd->add_option("--set", set.kind, "singleton, sa-l2, s-l1, ellipsoid or file")
        ->check(CLI::IsMember({"singleton", "sa-l2", "s-l1", "ellipsoid", "file"}))
        ->capture_default_str();
    cmd->add_option("--radius", set.radius, "set radius")->capture_default_str();
    cmd->add_option("--set-file", set.set_file, "uncertainty set (JSON) for --set file");
    cmd->add_option("--samples", set.samples, "machine history length n")->capture_default_str();
    cmd->add_option("--alpha", set.alpha, "machine confidence level alpha")->capture_default_str();
    cmd->add_option("--dof", set.dof, "chi-square degrees of freedom, 0 for S-1")->capture_default_str();
}

void check_shapes(const Problem& p, const UncertaintySet& set) {
    validate(set);
    if (set_num_states(set) != p.mdp.S() || set_num_actions(set) != p.mdp.A())
        fail(ErrorKind::dimension, "uncertainty set shape does not match the environment");
}

void emit_json(const Globals& g, const std::string& name, const Json& j) {
    if (!g.out_given) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    fs::create_directories(g.out);
    write_json_file((fs::path(g.out) / name).string(), j);
}

Json set_label(const SetOptions& s) { return {{"kind", s.kind}, {"radius", s.radius}}; }

int cmd_evaluate(const Globals& g, const EvalOptions& o) {
    const Problem prob = build_problem(o.env, g.seed);
    const UncertaintySet set = build_set(prob, o.set, g.seed);
    check_shapes(prob, set);
    const StationaryPolicy pi = resolve_policy(prob, o.policy);
    const Vec& w = prob.mdp.rho;

    RunTrace trace;
    double value = 0.0;
    if (o.algo == "pld") {
        PldParams p = o.pld;
        p.seed = g.seed;
        const auto r = pld_evaluate(prob.mdp, pi, set, p, w);
        trace = r.trace;
        value = r.value;
    } else if (o.algo == "cpi") {
        CpiParams p;
        p.eps = o.eps;
        p.max_iters = o.max_iters;
        p.lmo_eps = o.lmo_eps;
        const auto r = cpi_evaluate(prob.mdp, pi, set, p, w);
        trace = r.trace;
        value = r.value;
    } else if (o.algo == "pgd") {
        if (std::holds_alternative<EllipsoidParam>(set))
            throw UsageError("pgd steps in kernel space; ellipsoidal sets need --algo pld or cpi");
        PgdParams p;
        p.step = o.pgd_step;
        p.value_tol = o.pgd_value_tol;
        p.max_iters = o.pgd_max_iters;
        const auto r = pgd_baseline_evaluate(prob.mdp, pi, set, p, w);
        trace = r.trace;
        value = r.value;
    } else {
        if (!is_s_rectangular(set))
            throw UsageError("robust value iteration needs an s-rectangular set; use --algo pld or cpi");
        const auto r = robust_vi_evaluate(prob.mdp, pi, set, o.vi_tol);
        value = w.dot(r.v);
        trace.algorithm = "robust_vi";
        trace.params = {{"tol", o.vi_tol}};
        trace.records.push_back({r.iterations, value, 0.0, 0.0, 0});
        trace.best_value = value;
        trace.best_iter = r.iterations;
        trace.termination = "converged";
    }
    if (g.no_timing) trace = without_timing(trace);

    const fs::path stem = fs::path(g.out) / ("evaluate_" + o.algo);
    const fs::path trace_file = write_trace(stem, trace, g.fmt());
    Json summary = trace_summary(trace);
    summary["value"] = value;
    summary["env"] = prob.meta;
    summary["set"] = set_label(o.set);
    summary["policy"] = o.policy;
    write_json_file((fs::path(g.out) / ("evaluate_" + o.algo + "_summary.json")).string(), summary);
    spdlog::info("{}: value {} ({}), trace {}", o.algo, value, trace.termination, trace_file.string());
    std::cout << num(value) << '\n';
    return 0;
}

int cmd_improve(const Globals& g, const ImproveOptions& o) {
    const Problem prob = build_problem(o.env, g.seed);
    const UncertaintySet set = build_set(prob, o.set, g.seed);
    check_shapes(prob, set);

    AcaParams a;
    a.iters = o.iters;
    a.eta = o.eta;
    a.eps = o.critic_eps;
    a.seed = g.seed;
    a.ascent = o.ascent;
    a.warm_start = o.warm_start;
    if (o.critic == "exact") {
        if (!is_s_rectangular(set)) throw UsageError("the exact critic needs an s-rectangular set; use pld or cpi");
        a.critic = ExactCritic{o.exact_tol};
    } else if (o.critic == "cpi") {
        CpiParams c;
        c.max_iters = o.critic_cap;
        a.critic = c;
    } else {
        a.critic = o.pld;
    }
    ImprovementTrace tr = actor_critic(prob.mdp, set, a, prob.mdp.rho);
    if (g.no_timing) tr = without_timing(tr);

    const StationaryPolicy& chosen =
        o.select == "best" ? tr.policies[static_cast<std::size_t>(tr.best_k)] : tr.final_policy;
    const TransitionKernel eval = o.eval_kernel.empty()
                                      ? prob.nominal
                                      : kernel_from_json(read_json_file(o.eval_kernel), prob.mdp.S(), prob.mdp.A());
    const double oos = weighted_value(prob.mdp, chosen, eval, prob.mdp.rho);

    const fs::path out(g.out);
    write_improvement(out / "improve_trace", tr, g.fmt());
    write_json_file((out / "improve_policy.json").string(), policy_to_json(chosen));
    Json summary{{"best_k", tr.best_k},
                 {"running_average", tr.running_average},
                 {"selected", o.select},
                 {"critic", o.critic},
                 {"critic_value", tr.records[o.select == "best" ? tr.best_k : tr.records.size() - 1].critic_value},
                 {"out_of_sample", oos},
                 {"eval_kernel", o.eval_kernel.empty() ? "environment nominal" : o.eval_kernel},
                 {"env", prob.meta},
                 {"set", set_label(o.set)},
                 {"wall_ms", tr.wall_ms}};
    write_json_file((out / "improve_summary.json").string(), summary);
    spdlog::info("out-of-sample value {} with the {} iterate (k = {})", oos, o.select,
                 o.select == "best" ? tr.best_k : o.iters);
    std::cout << num(oos) << '\n';
    return 0;
}

Json parse_overrides(const std::vector<std::string>& items) {
    Json overrides = Json::object();
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--param expects key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq), text = item.substr(eq + 1);
        Json value = Json::parse(text, nullptr, false);
        if (value.is_discarded()) value = text;
        overrides[key] = value;
    }
    return overrides;
}

int cmd_preset(const Globals& g, const PresetOptions& o) {
    PresetContext ctx;
    ctx.jobs = std::max(1, g.jobs);
    ctx.out = g.out;
    std::optional<Json> previous;
    if (!o.manifest.empty()) {
        if (!o.name.empty() || !o.params.empty() || o.full)
            throw UsageError("--manifest replays a run; drop the preset name and overrides");
        previous = read_json_file(o.manifest);
        ctx.name = previous->at("preset").get<std::string>();
        ctx.seed = previous->at("seed").get<std::uint64_t>();
        ctx.params = resolve_params(ctx.name, false, previous->at("params"));
        ctx.format = parse_format(previous->at("format").get<std::string>());
        ctx.timing = previous->at("timing").get<bool>();
    } else {
        if (o.name.empty()) throw UsageError("preset needs a name or --manifest");
        ctx.name = o.name;
        ctx.seed = g.seed;
        ctx.params = resolve_params(o.name, o.full, parse_overrides(o.params));
        ctx.format = g.fmt();
        ctx.timing = !g.no_timing;
    }

    const PresetOutcome outcome = run_preset(ctx);
    std::cout << outcome.manifest.at("summary").dump() << '\n';
    if (outcome.failures > 0) {
        spdlog::error("{} run(s) failed; see manifest.json", outcome.failures);
        return kSolver;
    }
    if (!previous) return 0;

    std::map<std::string, std::string> before, after;
    auto collect = [](const Json& m, std::map<std::string, std::string>& into) {
        for (const auto& r : m.at("runs"))
            for (const auto& f : r.at("outputs")) into[f.at("file")] = f.at("sha1");
        for (const auto& t : m.at("tables")) into[t.at("file")] = t.at("sha1");
    };
    collect(*previous, before);
    collect(outcome.manifest, after);
    int same = 0;
    for (const auto& [file, sha] : before) same += after.count(file) && after.at(file) == sha;
    std::cout << "reproduced " << same << "/" << before.size() << " output files\n";
    if (!ctx.timing) return same == static_cast<int>(before.size()) && before.size() == after.size() ? 0 : kValidation;
    spdlog::info("the manifest recorded wall-clock times; byte comparison is informational only");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Robust policy evaluation and improvement for MDPs with uncertain transitions"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--jobs", g.jobs, "worker threads for presets")->capture_default_str();
    app.add_option("--format", g.format, "trace and table format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    app.add_flag("--no-timing", g.no_timing, "write zero wall-clock times so outputs are reproducible byte for byte");

    EvalOptions ev;
    auto* evaluate = app.add_subcommand("evaluate", "robust policy evaluation");
    add_env_options(evaluate, ev.env);
    add_set_options(evaluate, ev.set);
    evaluate->add_option("--algo", ev.algo, "pld, cpi, pgd or vi")
        ->required()
        ->check(CLI::IsMember({"pld", "cpi", "pgd", "vi"}));
    evaluate->add_option("--policy", ev.policy, "env, uniform or a JSON policy file")->capture_default_str();
    evaluate->add_option("--beta", ev.pld.beta, "PLD inverse temperature")->capture_default_str();
    evaluate->add_option("--eta", ev.pld.eta, "PLD step size")->capture_default_str();
    evaluate->add_option("--iters", ev.pld.iters, "PLD iterations")->capture_default_str();
    evaluate->add_option("--eps", ev.eps, "CPI tolerance")->capture_default_str();
    evaluate->add_option("--max-iters", ev.max_iters, "CPI iteration cap, 0 for the theoretical bound")
        ->capture_default_str();
    evaluate->add_option("--lmo-eps", ev.lmo_eps, "direction-finding tolerance, 0 for --eps")->capture_default_str();
    evaluate->add_option("--step", ev.pgd_step, "PGD step, 0 for the default rule")->capture_default_str();
    evaluate->add_option("--value-tol", ev.pgd_value_tol, "PGD stopping tolerance")->capture_default_str();
    evaluate->add_option("--pgd-max-iters", ev.pgd_max_iters, "PGD iteration cap")->capture_default_str();
    evaluate->add_option("--tol", ev.vi_tol, "robust value iteration tolerance")->capture_default_str();

    ImproveOptions im;
    auto* improve = app.add_subcommand("improve", "robust policy improvement by actor-critic");
    add_env_options(improve, im.env);
    add_set_options(improve, im.set);
    improve->add_option("--K", im.iters, "actor iterations")->capture_default_str();
    improve->add_option("--eta", im.eta, "actor step (default from the smoothness bound)");
    improve->add_option("--critic", im.critic, "pld, cpi or exact")
        ->check(CLI::IsMember({"pld", "cpi", "exact"}))
        ->capture_default_str();
    improve->add_option("--critic-beta", im.pld.beta)->capture_default_str();
    improve->add_option("--critic-eta", im.pld.eta)->capture_default_str();
    improve->add_option("--critic-iters", im.pld.iters)->capture_default_str();
    improve->add_option("--critic-eps", im.critic_eps, "CPI critic tolerance");
    improve->add_option("--critic-cap", im.critic_cap, "CPI critic iteration cap")->capture_default_str();
    improve->add_option("--exact-tol", im.exact_tol)->capture_default_str();
    improve->add_flag("--ascent", im.ascent, "step along +gradient");
    improve->add_flag("--warm-start", im.warm_start, "start each PLD critic at the previous worst parameter");
    improve->add_option("--select", im.select, "return the best or the last iterate")
        ->check(CLI::IsMember({"best", "last"}))
        ->capture_default_str();
    improve->add_option("--eval-kernel", im.eval_kernel, "kernel (JSON) for the out-of-sample value");

    PresetOptions pr;
    auto* preset = app.add_subcommand("preset", "run an experiment preset");
    preset->add_option("name", pr.name, "preset name")->check(CLI::IsMember(preset_names()));
    preset->add_flag("--full", pr.full, "original experiment sizes");
    preset->add_option("--param", pr.params, "override key=value (value parsed as JSON)");
    preset->add_option("--manifest", pr.manifest, "replay the run recorded in a manifest");

    EnvOptions dump_env;
    SetOptions dump_set;
    auto* env = app.add_subcommand("env", "environment utilities");
    env->require_subcommand(1);
    auto* env_dump = env->add_subcommand("dump", "print the MDP and nominal kernel as JSON");
    add_env_options(env_dump, dump_env);
    auto* set = app.add_subcommand("set", "uncertainty set utilities");
    set->require_subcommand(1);
    auto* set_dump = set->add_subcommand("dump", "print the uncertainty set as JSON");
    add_env_options(set_dump, dump_env);
    add_set_options(set_dump, dump_set);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kUsage;
    }
    g.out_given = app.get_option("--out")->count() > 0;

    try {
        if (evaluate->parsed() || improve->parsed()) fs::create_directories(g.out);
        if (evaluate->parsed()) return cmd_evaluate(g, ev);
        if (improve->parsed()) return cmd_improve(g, im);
        if (preset->parsed()) return cmd_preset(g, pr);
        if (env_dump->parsed()) {
            const Problem p = build_problem(dump_env, g.seed);
            Json j = to_json(p.mdp, p.nominal);
            j["meta"] = p.meta;
            j["policy"] = policy_to_json(p.policy);
            emit_json(g, "env.json", j);
            return 0;
        }
        if (set_dump->parsed()) {
            const Problem p = build_problem(dump_env, g.seed);
            const UncertaintySet s = build_set(p, dump_set, g.seed);
            check_shapes(p, s);
            emit_json(g, "set.json", to_json(s));
            return 0;
        }
        return kUsage;
    } catch (const UsageError& e) {
        spdlog::error("{}", e.what());
        return kUsage;
    } catch (const Error& e) {
        spdlog::error("{} error: {}", to_string(e.kind()), e.what());
        return e.kind() == ErrorKind::validation || e.kind() == ErrorKind::dimension ? kValidation : kSolver;
    } catch (const Json::exception& e) {
        spdlog::error("malformed JSON input: {}", e.what());
        return kValidation;
    } catch (const fs::filesystem_error& e) {
        spdlog::error("{}", e.what());
        return kValidation;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kSolver;
    }
}
