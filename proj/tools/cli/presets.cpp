#include "presets.hpp"

#include "problem.hpp"

#include "rmdp/diagnostics.hpp"
#include "rmdp/mle.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <map>
#include <memory>

namespace rmdp::cli {

namespace {

struct RunIo {
    const PresetContext& ctx;
    std::string id;
    std::string input_sha1;
    std::vector<fs::path> files;

    void inputs(const Json& j) { input_sha1 = git_blob_sha1(j.dump()); }
    void trace(const std::string& name, const RunTrace& t) {
        files.push_back(write_trace(ctx.out / "runs" / (id + "_" + name), ctx.timing ? t : without_timing(t),
                                    ctx.format));
    }
    void improvement(const std::string& name, const ImprovementTrace& t) {
        files.push_back(write_improvement(ctx.out / "runs" / (id + "_" + name), ctx.timing ? t : without_timing(t),
                                          ctx.format));
    }
    double ms(double wall_ms) const { return ctx.timing ? wall_ms : 0.0; }
};

struct Run {
    std::string id;
    std::uint64_t seed = 0;
    std::function<Json(RunIo&)> work;
};

struct RunRecord {
    std::string input_sha1;
    std::vector<fs::path> files;
    Json values;
    std::string error;
    bool ok() const { return error.empty(); }
};

using Tables = std::vector<std::pair<std::string, Table>>;

struct Plan {
    std::vector<Run> runs;
    std::function<Tables(const std::vector<RunRecord>&, Json& summary)> aggregate;
};

std::pair<double, double> mean_std(const std::vector<double>& x) {
    if (x.empty()) return {std::nan(""), std::nan("")};
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    if (x.size() < 2) return {m, 0.0};
    double var = 0.0;
    for (double v : x) var += (v - m) * (v - m);
    return {m, std::sqrt(var / static_cast<double>(x.size() - 1))};
}

std::string instance_hash(const MdpInstance& mdp, const TransitionKernel& p, const UncertaintySet& set) {
    return git_blob_sha1(Json{{"mdp", to_json(mdp, p)}, {"set", to_json(set)}}.dump());
}

std::string radius_tag(std::size_t i) { return "r" + std::to_string(i); }

// ---------------------------------------------------------------------------
// GridWorld

Plan grid_sweep(const PresetContext& ctx, bool rect) {
    const Json& P = ctx.params;
    const auto grid = std::make_shared<const GridWorld>(build_gridworld());
    const auto radii = P.at("radii").get<std::vector<double>>();
    const int seeds = P.at("seeds").get<int>();
    const auto pi = std::make_shared<const StationaryPolicy>(StationaryPolicy::uniform(grid->mdp.S(), grid->mdp.A()));

    PldParams pld;
    pld.beta = P.at("beta").get<double>();
    pld.eta = P.at("eta").get<double>();
    pld.iters = P.at("iters").get<int>();
    CpiParams cpi;
    cpi.eps = P.at("eps").get<double>();
    cpi.max_iters = P.at("cpi_cap").get<long long>();

    Plan plan;
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        const double r = radii[ri];
        auto set = std::make_shared<const UncertaintySet>(rect ? UncertaintySet{SaRectL2{grid->p_ref, r}}
                                                               : UncertaintySet{gridworld_ellipsoid(*grid, r)});
        const std::string inst = instance_hash(grid->mdp, grid->p_ref, *set);
        for (int i = 0; i < seeds; ++i) {
            const std::uint64_t seed = ctx.seed + static_cast<std::uint64_t>(i);
            plan.runs.push_back({radius_tag(ri) + "_pld_s" + std::to_string(seed), seed,
                                 [=](RunIo& io) {
                                     PldParams p = pld;
                                     p.seed = seed;
                                     io.inputs({{"instance", inst}, {"algo", "pld"}, {"beta", p.beta},
                                                {"eta", p.eta}, {"iters", p.iters}, {"seed", seed}});
                                     const auto res = pld_evaluate(grid->mdp, *pi, *set, p, grid->mdp.rho);
                                     io.trace("trace", res.trace);
                                     return Json{{"radius", r}, {"algo", "pld"}, {"value", res.value}};
                                 }});
        }
        plan.runs.push_back({radius_tag(ri) + "_cpi", ctx.seed, [=](RunIo& io) {
                                 io.inputs({{"instance", inst}, {"algo", "cpi"}, {"eps", cpi.eps},
                                            {"max_iters", cpi.max_iters}});
                                 const auto res = cpi_evaluate(grid->mdp, *pi, *set, cpi, grid->mdp.rho);
                                 io.trace("trace", res.trace);
                                 return Json{{"radius", r},
                                             {"algo", "cpi"},
                                             {"value", res.value},
                                             {"termination", res.trace.termination}};
                             }});
    }
    plan.aggregate = [radii](const std::vector<RunRecord>& recs, Json& summary) {
        Table t{{"radius", "algo", "mean_value", "std_value"}, {}};
        for (double r : radii) {
            for (const char* algo : {"pld", "cpi"}) {
                std::vector<double> v;
                for (const auto& rec : recs)
                    if (rec.ok() && rec.values.at("radius").get<double>() == r && rec.values.at("algo") == algo)
                        v.push_back(rec.values.at("value").get<double>());
                const auto [m, s] = mean_std(v);
                t.rows.push_back({num(r), algo, num(m), num(s)});
            }
        }
        summary["rows"] = t.rows.size();
        return Tables{{"sweep", t}};
    };
    return plan;
}

Plan grid_trajectory(const PresetContext& ctx) {
    const Json& P = ctx.params;
    const auto grid = std::make_shared<const GridWorld>(build_gridworld());
    const auto pi = std::make_shared<const StationaryPolicy>(StationaryPolicy::uniform(grid->mdp.S(), grid->mdp.A()));
    const int seeds = P.at("seeds").get<int>();
    PldParams pld;
    pld.beta = P.at("beta").get<double>();
    pld.eta = P.at("eta").get<double>();
    pld.iters = P.at("iters").get<int>();

    Plan plan;
    for (const std::string kind : {"rect", "nonrect"}) {
        const double r = P.at(kind == "rect" ? "radius_rect" : "radius_nonrect").get<double>();
        auto set = std::make_shared<const UncertaintySet>(kind == "rect" ? UncertaintySet{SaRectL2{grid->p_ref, r}}
                                                                         : UncertaintySet{gridworld_ellipsoid(*grid, r)});
        const std::string inst = instance_hash(grid->mdp, grid->p_ref, *set);
        for (int i = 0; i < seeds; ++i) {
            const std::uint64_t seed = ctx.seed + static_cast<std::uint64_t>(i);
            plan.runs.push_back({kind + "_s" + std::to_string(seed), seed, [=](RunIo& io) {
                                     PldParams p = pld;
                                     p.seed = seed;
                                     io.inputs({{"instance", inst}, {"algo", "pld"}, {"beta", p.beta},
                                                {"eta", p.eta}, {"iters", p.iters}, {"seed", seed}});
                                     const auto res = pld_evaluate(grid->mdp, *pi, *set, p, grid->mdp.rho);
                                     io.trace("trace", res.trace);
                                     Json iters = Json::array(), values = Json::array();
                                     for (const auto& rec : res.trace.records) {
                                         iters.push_back(rec.iter);
                                         values.push_back(rec.value);
                                     }
                                     return Json{{"set", kind}, {"radius", r}, {"seed", seed},
                                                 {"iters", iters}, {"values", values}};
                                 }});
        }
    }
    plan.aggregate = [](const std::vector<RunRecord>& recs, Json& summary) {
        Table t{{"set", "radius", "seed", "iter", "value"}, {}};
        for (const auto& rec : recs) {
            if (!rec.ok()) continue;
            const auto& v = rec.values;
            for (std::size_t k = 0; k < v.at("iters").size(); ++k)
                t.rows.push_back({v.at("set").get<std::string>(), num(v.at("radius").get<double>()),
                                  std::to_string(v.at("seed").get<std::uint64_t>()),
                                  std::to_string(v.at("iters")[k].get<int>()), num(v.at("values")[k].get<double>())});
        }
        summary["rows"] = t.rows.size();
        return Tables{{"trajectory", t}};
    };
    return plan;
}

// ---------------------------------------------------------------------------
// Garnet

Plan garnet_compare(const PresetContext& ctx) {
    const Json& P = ctx.params;
    const auto sizes = P.at("sizes").get<std::vector<int>>();
    const int seeds = P.at("seeds").get<int>();
    const int actions = P.at("actions").get<int>();
    const double radius = P.at("radius").get<double>();
    const double delta = P.at("delta").get<double>();
    const std::string rule = P.at("eps_rule").get<std::string>();
    const int samples = P.at("mismatch_samples").get<int>();
    const long long cap = P.at("cpi_cap").get<long long>();
    PgdParams pgd;
    pgd.step = P.at("pgd_step").get<double>();
    pgd.value_tol = P.at("pgd_value_tol").get<double>();
    if (rule != "mismatch" && rule != "printed") throw UsageError("eps_rule must be mismatch or printed");

    Plan plan;
    for (int S : sizes) {
        for (int i = 0; i < seeds; ++i) {
            const std::uint64_t seed = ctx.seed + static_cast<std::uint64_t>(i);
            plan.runs.push_back({"S" + std::to_string(S) + "_s" + std::to_string(seed), seed, [=](RunIo& io) {
                                     GarnetSpec gs;
                                     gs.num_states = S;
                                     gs.num_actions = actions;
                                     gs.seed = seed;
                                     const auto ga = build_garnet(gs);
                                     const UncertaintySet set = SRectL1{ga.p_ref, radius};
                                     const Vec w = Vec::Constant(S, 1.0 / S);
                                     CpiParams cp;
                                     cp.max_iters = cap;
                                     double dd = std::nan("");
                                     if (rule == "mismatch") {
                                         dd = mismatch_coefficient(set, ga.policy, ga.mdp, samples, seed).value;
                                         cp.eps = delta / (2.0 * dd);
                                     } else {
                                         cp.eps = delta * S / (1.0 - ga.mdp.gamma);
                                     }
                                     io.inputs({{"instance", instance_hash(ga.mdp, ga.p_ref, set)},
                                                {"policy", policy_to_json(ga.policy)}, {"eps", cp.eps},
                                                {"cpi_cap", cap}, {"pgd_step", pgd.step},
                                                {"pgd_value_tol", pgd.value_tol}});
                                     const auto c = cpi_evaluate(ga.mdp, ga.policy, set, cp, w);
                                     io.trace("cpi", c.trace);
                                     const auto g = pgd_baseline_evaluate(ga.mdp, ga.policy, set, pgd, w);
                                     io.trace("pgd", g.trace);
                                     const double vi = w.dot(robust_vi_evaluate(ga.mdp, ga.policy, set, 1e-9).v);
                                     return Json{{"S", S},
                                                 {"seed", seed},
                                                 {"eps", cp.eps},
                                                 {"mismatch", dd},
                                                 {"cpi", {c.value, c.iterations, io.ms(c.trace.wall_ms)}},
                                                 {"pgd", {g.value, g.iterations, io.ms(g.trace.wall_ms)}},
                                                 {"robust_vi", {vi, 0, 0.0}}};
                                 }});
        }
    }
    plan.aggregate = [sizes](const std::vector<RunRecord>& recs, Json& summary) {
        Table runs{{"S", "seed", "algo", "value", "iterations", "elapsed_ms"}, {}};
        Table agg{{"S", "algo", "mean_value", "mean_elapsed_ms", "max_rel_diff_to_cpi"}, {}};
        for (int S : sizes) {
            std::map<std::string, std::vector<double>> vals, ms;
            std::map<std::string, double> worst;
            for (const auto& rec : recs) {
                if (!rec.ok() || rec.values.at("S").get<int>() != S) continue;
                const double cpi = rec.values.at("cpi")[0].get<double>();
                for (const char* algo : {"cpi", "pgd", "robust_vi"}) {
                    const auto& a = rec.values.at(algo);
                    runs.rows.push_back({std::to_string(S), std::to_string(rec.values.at("seed").get<std::uint64_t>()),
                                         algo, num(a[0].get<double>()), std::to_string(a[1].get<long long>()),
                                         num(a[2].get<double>())});
                    vals[algo].push_back(a[0].get<double>());
                    ms[algo].push_back(a[2].get<double>());
                    const double rel = std::abs(a[0].get<double>() - cpi) / std::max(std::abs(cpi), 1e-300);
                    worst[algo] = std::max(worst[algo], rel);
                }
            }
            for (const char* algo : {"cpi", "pgd", "robust_vi"})
                agg.rows.push_back({std::to_string(S), algo, num(mean_std(vals[algo]).first),
                                    num(mean_std(ms[algo]).first), num(worst[algo])});
        }
        summary["rows"] = runs.rows.size();
        return Tables{{"garnet", runs}, {"garnet_summary", agg}};
    };
    return plan;
}

// ---------------------------------------------------------------------------
// Machine replacement

/// Reference out-of-sample costs, "ACA (benchmark)", keyed by map, n and coverage 1 - alpha.
std::string machine_reference(const std::string& map, int n, double alpha) {
    static const std::map<std::string, std::map<int, std::vector<std::string>>> table{
        {"dof5",
         {{500, {"6.02 (6.04)", "6.02 (6.04)", "6.02 (6.04)", "6.02 (6.06)"}},
          {1000, {"6.03 (6.02)", "6.04 (6.02)", "6.04 (6.02)", "6.00 (6.02)"}},
          {2500, {"6.03 (6.01)", "6.03 (6.00)", "6.02 (6.00)", "6.02 (6.01)"}},
          {5000, {"6.01 (5.99)", "6.03 (5.99)", "6.02 (5.99)", "6.03 (5.99)"}}}},
        {"dof25",
         {{500, {"8.34 (15.72)", "8.40 (14.24)", "6.48 (13.44)", "7.41 (19.29)"}},
          {1000, {"6.57 (8.45)", "6.27 (9.79)", "6.96 (10.60)", "6.77 (10.02)"}},
          {2500, {"6.26 (6.55)", "6.08 (6.84)", "6.36 (6.82)", "6.20 (8.47)"}},
          {5000, {"6.23 (6.64)", "6.49 (6.53)", "6.29 (6.50)", "6.24 (6.54)"}}}}};
    const double alphas[] = {0.2, 0.1, 0.05, 0.01};
    const auto m = table.find(map);
    if (m == table.end()) return "";
    const auto row = m->second.find(n);
    if (row == m->second.end()) return "";
    for (int j = 0; j < 4; ++j)
        if (std::abs(alpha - alphas[j]) < 1e-12) return row->second[j];
    return "";
}

std::shared_ptr<const Problem> machine_problem(const Json& P) {
    EnvOptions env;
    env.name = "machine";
    env.map = P.at("map").get<std::string>();
    env.kernel_file = P.at("kernel_file").get<std::string>();
    return std::make_shared<const Problem>(build_problem(env, 0));
}

Plan machine_improvement(const PresetContext& ctx) {
    const Json& P = ctx.params;
    const auto problem = machine_problem(P);
    const auto map = P.at("map").get<std::string>();
    const auto ns = P.at("samples").get<std::vector<int>>();
    const auto alphas = P.at("alphas").get<std::vector<double>>();
    const int seeds = P.at("seeds").get<int>();
    AcaParams aca;
    aca.iters = P.at("K").get<int>();
    aca.eta = P.at("eta").get<double>();
    PldParams critic;
    critic.beta = P.at("critic_beta").get<double>();
    critic.eta = P.at("critic_eta").get<double>();
    critic.iters = P.at("critic_iters").get<int>();
    aca.critic = critic;
    const std::string provenance = problem->machine->provenance;

    Plan plan;
    for (int n : ns) {
        for (double alpha : alphas) {
            for (int i = 0; i < seeds; ++i) {
                const std::uint64_t seed = ctx.seed + static_cast<std::uint64_t>(i);
                const std::string id = "n" + std::to_string(n) + "_a" + num(alpha) + "_s" + std::to_string(seed);
                plan.runs.push_back({id, seed, [=](RunIo& io) {
                                         SetOptions so;
                                         so.kind = "ellipsoid";
                                         so.samples = n;
                                         so.alpha = alpha;
                                         const auto set = build_set(*problem, so, seed);
                                         AcaParams a = aca;
                                         a.seed = seed;
                                         io.inputs({{"instance", instance_hash(problem->mdp, problem->nominal, set)},
                                                    {"K", a.iters}, {"eta", *a.eta}, {"critic_beta", critic.beta},
                                                    {"critic_eta", critic.eta}, {"critic_iters", critic.iters},
                                                    {"seed", seed}});
                                         const auto tr = actor_critic(problem->mdp, set, a, problem->mdp.rho);
                                         io.improvement("aca", tr);
                                         const auto& mdp = problem->mdp;
                                         const auto& best = tr.policies[static_cast<std::size_t>(tr.best_k)];
                                         return Json{
                                             {"n", n},
                                             {"alpha", alpha},
                                             {"seed", seed},
                                             {"out_of_sample", weighted_value(mdp, best, problem->nominal, mdp.rho)},
                                             {"out_of_sample_last",
                                              weighted_value(mdp, tr.final_policy, problem->nominal, mdp.rho)},
                                             {"robust_estimate", tr.records[tr.best_k].critic_value},
                                             {"best_k", tr.best_k}};
                                     }});
            }
        }
    }
    plan.aggregate = [=](const std::vector<RunRecord>& recs, Json& summary) {
        Table runs{{"n", "alpha", "seed", "out_of_sample", "out_of_sample_last", "robust_estimate"}, {}};
        Table agg{{"n", "alpha", "mean_out_of_sample", "std_out_of_sample", "mean_robust_estimate", "reference",
                   "kernel"},
                  {}};
        for (int n : ns) {
            for (double alpha : alphas) {
                std::vector<double> oos, rob;
                for (const auto& rec : recs) {
                    if (!rec.ok()) continue;
                    const auto& v = rec.values;
                    if (v.at("n").get<int>() != n || v.at("alpha").get<double>() != alpha) continue;
                    runs.rows.push_back({std::to_string(n), num(alpha), std::to_string(v.at("seed").get<std::uint64_t>()),
                                         num(v.at("out_of_sample").get<double>()),
                                         num(v.at("out_of_sample_last").get<double>()),
                                         num(v.at("robust_estimate").get<double>())});
                    oos.push_back(v.at("out_of_sample").get<double>());
                    rob.push_back(v.at("robust_estimate").get<double>());
                }
                const auto [m, s] = mean_std(oos);
                agg.rows.push_back({std::to_string(n), num(alpha), num(m), num(s), num(mean_std(rob).first),
                                    machine_reference(map, n, alpha), provenance});
            }
        }
        summary["kernel"] = provenance;
        summary["note"] = "reference cells come from an authentic kernel; the embedded kernel is an approximation";
        return Tables{{"machine", runs}, {"machine_summary", agg}};
    };
    return plan;
}

Plan mle_coverage(const PresetContext& ctx) {
    const Json& P = ctx.params;
    const auto problem = machine_problem(P);
    const auto& mr = *problem->machine;
    if (!mr.xi0) fail(ErrorKind::validation, "coverage needs a kernel inside the map's image");
    const int n = P.at("samples").get<int>();
    const double alpha = P.at("alpha").get<double>();
    const int dof = P.at("dof").get<int>();
    const int seeds = P.at("seeds").get<int>();

    Plan plan;
    for (int i = 0; i < seeds; ++i) {
        const std::uint64_t seed = ctx.seed + static_cast<std::uint64_t>(i);
        plan.runs.push_back({"s" + std::to_string(seed), seed, [=](RunIo& io) {
                                 const auto& m = *problem->machine;
                                 const History h = sample_history(m.mdp, m.p0, m.exploration, n, derive_seed(seed, 1));
                                 ConfidenceOptions o;
                                 o.alpha = alpha;
                                 o.dof = dof;
                                 io.inputs({{"instance", git_blob_sha1(to_json(m.mdp, m.p0).dump())},
                                            {"n", n}, {"alpha", alpha}, {"dof", dof}, {"seed", seed}});
                                 const auto e = confidence_ellipsoid(m.map, m.region, h, o);
                                 const double stat = e.h.eval(*m.xi0 - e.center);
                                 return Json{{"seed", seed}, {"statistic", stat}, {"radius", e.radius},
                                             {"covered", stat <= e.radius}};
                             }});
    }
    plan.aggregate = [=](const std::vector<RunRecord>& recs, Json& summary) {
        Table runs{{"seed", "statistic", "radius", "covered"}, {}};
        int covered = 0, total = 0;
        for (const auto& rec : recs) {
            if (!rec.ok()) continue;
            const auto& v = rec.values;
            const bool c = v.at("covered").get<bool>();
            covered += c;
            ++total;
            runs.rows.push_back({std::to_string(v.at("seed").get<std::uint64_t>()), num(v.at("statistic").get<double>()),
                                 num(v.at("radius").get<double>()), c ? "1" : "0"});
        }
        const double frac = total ? static_cast<double>(covered) / total : std::nan("");
        const double threshold = 1.0 - alpha - 0.05;
        Table agg{{"map", "n", "alpha", "dof", "covered", "total", "fraction", "threshold", "meets_threshold"},
                  {{P.at("map").get<std::string>(), std::to_string(n), num(alpha), std::to_string(dof),
                    std::to_string(covered), std::to_string(total), num(frac), num(threshold),
                    frac >= threshold ? "1" : "0"}}};
        summary["coverage"] = frac;
        summary["meets_threshold"] = frac >= threshold;
        return Tables{{"coverage", runs}, {"coverage_summary", agg}};
    };
    return plan;
}

Plan make_plan(const PresetContext& ctx) {
    if (ctx.name == "grid_rect_sweep") return grid_sweep(ctx, true);
    if (ctx.name == "grid_nonrect_sweep") return grid_sweep(ctx, false);
    if (ctx.name == "grid_trajectory") return grid_trajectory(ctx);
    if (ctx.name == "garnet_compare") return garnet_compare(ctx);
    if (ctx.name == "machine_improvement") return machine_improvement(ctx);
    if (ctx.name == "mle_coverage") return mle_coverage(ctx);
    throw UsageError("unknown preset '" + ctx.name + "'");
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"grid_rect_sweep", "grid_nonrect_sweep", "grid_trajectory",
                                                "garnet_compare",  "machine_improvement", "mle_coverage"};
    return names;
}

Json preset_defaults(const std::string& name, bool full) {
    const Json pld{{"beta", 160.0}, {"eta", 0.8}, {"iters", 100}, {"seeds", 20}};
    if (name == "grid_rect_sweep" || name == "grid_nonrect_sweep") {
        Json j = pld;
        j["radii"] = name == "grid_rect_sweep" ? std::vector<double>{1e-3, 1e-2, 1e-1, 1.0}
                                               : std::vector<double>{1e-2, 1e-1, 1.0, 10.0};
        j["eps"] = 1e-2;
        j["cpi_cap"] = 20000;
        return j;
    }
    if (name == "grid_trajectory") {
        Json j = pld;
        j["radius_rect"] = 1.0;
        j["radius_nonrect"] = 10.0;
        return j;
    }
    if (name == "garnet_compare")
        return {{"sizes", full ? std::vector<int>{100, 200, 300, 400} : std::vector<int>{20, 50, 100}},
                {"seeds", 20},
                {"actions", 10},
                {"radius", 5.0},
                {"delta", 0.01},
                {"eps_rule", "mismatch"},
                {"mismatch_samples", 50},
                {"cpi_cap", 0},
                {"pgd_step", 0.0},
                {"pgd_value_tol", 2e-5}};
    if (name == "machine_improvement")
        return {{"map", "dof25"},
                {"kernel_file", ""},
                {"samples", full ? std::vector<int>{500, 1000, 2500, 5000} : std::vector<int>{2500}},
                {"alphas", full ? std::vector<double>{0.2, 0.1, 0.05, 0.01} : std::vector<double>{0.2}},
                {"seeds", 20},
                {"K", 100},
                {"eta", 0.05},
                {"critic_beta", 450.0},
                {"critic_eta", 0.07},
                {"critic_iters", 50}};
    if (name == "mle_coverage")
        return {{"map", "dof5"}, {"kernel_file", ""}, {"samples", 5000}, {"alpha", 0.1}, {"dof", 0}, {"seeds", 200}};
    throw UsageError("unknown preset '" + name + "'");
}

Json resolve_params(const std::string& name, bool full, const Json& overrides) {
    Json params = preset_defaults(name, full);
    for (const auto& [key, value] : overrides.items()) {
        if (!params.contains(key)) throw UsageError("preset " + name + " has no parameter '" + key + "'");
        const Json& def = params[key];
        const bool numeric = def.is_number() && value.is_number();
        if (def.type() != value.type() && !numeric)
            throw UsageError("parameter '" + key + "' expects " + std::string(def.type_name()));
        if (def.is_number_integer() && !value.is_number_integer())
            throw UsageError("parameter '" + key + "' expects an integer");
        params[key] = value;
    }
    return params;
}

PresetOutcome run_preset(const PresetContext& ctx) {
    Plan plan = make_plan(ctx);
    fs::create_directories(ctx.out / "runs");
    spdlog::info("preset {}: {} runs on {} worker(s)", ctx.name, plan.runs.size(), ctx.jobs);

    std::vector<RunRecord> recs(plan.runs.size());
    const auto errors = run_parallel(plan.runs.size(), ctx.jobs, [&](std::size_t i) {
        RunIo io{ctx, plan.runs[i].id, {}, {}};
        spdlog::debug("run {} started", io.id);
        recs[i].values = plan.runs[i].work(io);
        recs[i].input_sha1 = io.input_sha1;
        recs[i].files = io.files;
        spdlog::debug("run {} finished", io.id);
    });

    PresetOutcome outcome;
    Json runs = Json::array();
    std::string all_inputs;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        recs[i].error = errors[i];
        Json entry{{"id", plan.runs[i].id}, {"seed", plan.runs[i].seed}, {"input_sha1", recs[i].input_sha1},
                   {"status", recs[i].ok() ? "ok" : "failed"}};
        if (!recs[i].ok()) {
            ++outcome.failures;
            entry["error"] = recs[i].error;
            spdlog::error("run {} failed: {}", plan.runs[i].id, recs[i].error);
        }
        Json outputs = Json::array();
        for (const auto& f : recs[i].files)
            outputs.push_back({{"file", fs::relative(f, ctx.out).generic_string()}, {"sha1", file_sha1(f)}});
        entry["outputs"] = outputs;
        runs.push_back(std::move(entry));
        all_inputs += recs[i].input_sha1;
    }

    Json summary = Json::object();
    Json tables = Json::array();
    for (const auto& [stem, table] : plan.aggregate(recs, summary)) {
        const fs::path f = write_table(ctx.out / stem, table, ctx.format);
        tables.push_back({{"file", fs::relative(f, ctx.out).generic_string()}, {"sha1", file_sha1(f)}});
        spdlog::info("wrote {}", f.string());
    }

    outcome.manifest = {{"manifest_version", 1},
                        {"tool", "rmdp 0.1.0"},
                        {"preset", ctx.name},
                        {"seed", ctx.seed},
                        {"params", ctx.params},
                        {"format", ctx.format == Format::csv ? "csv" : "json"},
                        {"timing", ctx.timing},
                        {"inputs_sha1", git_blob_sha1(ctx.params.dump() + all_inputs)},
                        {"runs", runs},
                        {"tables", tables},
                        {"summary", summary},
                        {"failures", outcome.failures}};
    write_json_file((ctx.out / "manifest.json").string(), outcome.manifest);
    return outcome;
}

}  // namespace rmdp::cli
