#include "rmdp/diagnostics.hpp"
#include "rmdp/environments.hpp"
#include "rmdp/io.hpp"
#include "rmdp/mle.hpp"
#include "rmdp/projections.hpp"
#include "rmdp/robust_improve.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace rmdp;

namespace {

py::dict summary_dict(const RunTrace& t) { return py::module_::import("json").attr("loads")(trace_summary(t).dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Robust policy evaluation and improvement for MDPs with uncertain transition kernels";

    // Later registrations are tried first, so the subclass goes second.
    const auto& error = py::register_exception<Error>(m, "RmdpError", PyExc_RuntimeError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", error.ptr());

    // -- MDP primitives -------------------------------------------------------

    py::class_<MdpInstance>(m, "MdpInstance")
        .def(py::init([](const Mat& cost, double gamma, const Vec& rho) {
                 MdpInstance mdp{static_cast<int>(cost.rows()), static_cast<int>(cost.cols()), cost, gamma, rho};
                 mdp.validate();
                 return mdp;
             }),
             py::arg("cost"), py::arg("gamma"), py::arg("rho"))
        .def_readonly("num_states", &MdpInstance::num_states)
        .def_readonly("num_actions", &MdpInstance::num_actions)
        .def_readonly("cost", &MdpInstance::cost)
        .def_readonly("gamma", &MdpInstance::gamma)
        .def_readonly("rho", &MdpInstance::rho)
        .def("validate", &MdpInstance::validate);

    py::class_<TransitionKernel>(m, "TransitionKernel")
        .def(py::init([](int S, int A, const RowMat& p) {
                 TransitionKernel k(S, A, p);
                 k.validate(1e-9);
                 return k;
             }),
             py::arg("num_states"), py::arg("num_actions"), py::arg("matrix"))
        .def_property_readonly("S", &TransitionKernel::S)
        .def_property_readonly("A", &TransitionKernel::A)
        .def_property_readonly("matrix", [](const TransitionKernel& k) { return k.matrix(); })
        .def("stochasticity_residual", &TransitionKernel::stochasticity_residual);

    py::class_<StationaryPolicy>(m, "StationaryPolicy")
        .def(py::init([](const Mat& pi) {
                 StationaryPolicy p{pi};
                 p.validate(1e-9);
                 return p;
             }),
             py::arg("pi"))
        .def_static("uniform", &StationaryPolicy::uniform)
        .def_static("deterministic", &StationaryPolicy::deterministic)
        .def_readonly("pi", &StationaryPolicy::pi);

    py::class_<AffineKernelMap>(m, "AffineKernelMap")
        .def_readonly("num_states", &AffineKernelMap::num_states)
        .def_readonly("num_actions", &AffineKernelMap::num_actions)
        .def_readonly("base", &AffineKernelMap::base)
        .def_readonly("jacobian", &AffineKernelMap::jacobian)
        .def_property_readonly("q", &AffineKernelMap::q)
        .def("kernel", &AffineKernelMap::kernel)
        .def("coordinates", &AffineKernelMap::coordinates)
        .def_static("identity", &AffineKernelMap::identity)
        .def_static("drop_last", &AffineKernelMap::drop_last);

    m.def("value_function", &value_function, py::arg("mdp"), py::arg("policy"), py::arg("kernel"));
    m.def("weighted_value", &weighted_value, py::arg("mdp"), py::arg("policy"), py::arg("kernel"), py::arg("weight"));
    m.def("weighted_visitation", &weighted_visitation, py::arg("mdp"), py::arg("policy"), py::arg("kernel"),
          py::arg("weight"));
    m.def("adversary_gradient_kernel", &adversary_gradient_kernel, py::arg("mdp"), py::arg("policy"),
          py::arg("kernel"), py::arg("weight"));
    m.def("adversary_gradient_param", &adversary_gradient_param, py::arg("mdp"), py::arg("policy"), py::arg("map"),
          py::arg("xi"), py::arg("weight"));
    m.def("policy_gradient", &policy_gradient, py::arg("mdp"), py::arg("policy"), py::arg("kernel"),
          py::arg("weight"));
    m.def(
        "optimal_values",
        [](const MdpInstance& mdp, const TransitionKernel& k, double tol) {
            const auto r = optimal_values(mdp, k, tol);
            return py::make_tuple(r.v, r.actions);
        },
        py::arg("mdp"), py::arg("kernel"), py::arg("tol") = 1e-12);

    // -- Uncertainty sets -----------------------------------------------------

    py::class_<ParamRegion>(m, "ParamRegion")
        .def_static("unbounded", &ParamRegion::unbounded)
        .def_static("box", &ParamRegion::box)
        .def_readonly("dim", &ParamRegion::dim)
        .def("project", &ParamRegion::project);

    py::class_<QuadraticForm>(m, "QuadraticForm")
        .def_static("diagonal", &QuadraticForm::diagonal)
        .def_static("dense", &QuadraticForm::dense)
        .def("eval", &QuadraticForm::eval)
        .def("to_dense", &QuadraticForm::to_dense);

    py::class_<SaRectL2>(m, "SaRectL2")
        .def(py::init<TransitionKernel, double>(), py::arg("p_ref"), py::arg("radius"))
        .def_readonly("p_ref", &SaRectL2::p_ref)
        .def_readonly("radius", &SaRectL2::radius);
    py::class_<SRectL1>(m, "SRectL1")
        .def(py::init<TransitionKernel, double>(), py::arg("p_ref"), py::arg("radius"))
        .def_readonly("p_ref", &SRectL1::p_ref)
        .def_readonly("radius", &SRectL1::radius);
    py::class_<Singleton>(m, "Singleton")
        .def(py::init<TransitionKernel>(), py::arg("p"))
        .def_readonly("p", &Singleton::p);
    py::class_<EllipsoidParam>(m, "EllipsoidParam")
        .def(py::init<AffineKernelMap, Vec, QuadraticForm, double, ParamRegion>(), py::arg("map"),
             py::arg("center"), py::arg("h"), py::arg("radius"), py::arg("region"))
        .def_readonly("map", &EllipsoidParam::map)
        .def_readonly("center", &EllipsoidParam::center)
        .def_readonly("h", &EllipsoidParam::h)
        .def_readonly("radius", &EllipsoidParam::radius)
        .def_readonly("region", &EllipsoidParam::region);

    m.def("kind_name", &kind_name);
    m.def("is_s_rectangular", &is_s_rectangular);
    m.def("validate_set", &validate);
    m.def("nominal_kernel", &nominal_kernel);
    m.def(
        "project", [](const UncertaintySet& s, const TransitionKernel& p) { return project(s, p); }, py::arg("set"),
        py::arg("point"));
    m.def(
        "project_param", [](const EllipsoidParam& s, const Vec& xi) { return project_param(s, xi); }, py::arg("set"),
        py::arg("xi"));
    m.def(
        "linear_max_oracle",
        [](const UncertaintySet& s, const RowMat& g, double eps) {
            const auto r = linear_max_oracle(s, g, eps);
            return py::make_tuple(r.maximizer, r.value);
        },
        py::arg("set"), py::arg("grad"), py::arg("eps"));
    m.def(
        "membership",
        [](const UncertaintySet& s, const TransitionKernel& p, double tol) {
            const auto r = membership(s, p, tol);
            return py::make_tuple(r.inside, r.residual);
        },
        py::arg("set"), py::arg("point"), py::arg("tol") = 1e-9);
    m.def("simplex_project", [](const Vec& v) { return simplex_project(v); });
    m.def("degree_of_nonrectangularity", &degree_of_nonrectangularity, py::arg("set"), py::arg("anchor"),
          py::arg("policy"), py::arg("mdp"), py::arg("eps_inner") = 1e-8);
    m.def(
        "mismatch_coefficient",
        [](const UncertaintySet& s, const StationaryPolicy& pi, const MdpInstance& mdp, int samples,
           std::uint64_t seed) { return mismatch_coefficient(s, pi, mdp, samples, seed).value; },
        py::arg("set"), py::arg("policy"), py::arg("mdp"), py::arg("samples"), py::arg("seed"));
    m.def("chi2_quantile", &chi2_quantile, py::arg("dof"), py::arg("p"));
    m.def(
        "confidence_ellipsoid",
        [](const AffineKernelMap& map, const ParamRegion& region, const std::vector<std::pair<int, int>>& history,
           double alpha, int dof) {
            History h;
            for (const auto& [s, a] : history) h.push_back({s, a});
            ConfidenceOptions o;
            o.alpha = alpha;
            o.dof = dof;
            return confidence_ellipsoid(map, region, h, o);
        },
        py::arg("map"), py::arg("region"), py::arg("history"), py::arg("alpha"), py::arg("dof") = 0);

    // -- Robust evaluation ----------------------------------------------------

    py::class_<TraceRecord>(m, "TraceRecord")
        .def_readonly("iter", &TraceRecord::iter)
        .def_readonly("value", &TraceRecord::value)
        .def_readonly("gap", &TraceRecord::gap)
        .def_readonly("step", &TraceRecord::step)
        .def_readonly("elapsed_ns", &TraceRecord::elapsed_ns);
    py::class_<RunTrace>(m, "RunTrace")
        .def_readonly("algorithm", &RunTrace::algorithm)
        .def_readonly("records", &RunTrace::records)
        .def_readonly("best_value", &RunTrace::best_value)
        .def_readonly("best_iter", &RunTrace::best_iter)
        .def_readonly("termination", &RunTrace::termination)
        .def_readonly("wall_ms", &RunTrace::wall_ms)
        .def("summary", &summary_dict);

    py::class_<PldParams>(m, "PldParams")
        .def(py::init([](double beta, double eta, int iters, std::uint64_t seed, bool track_best) {
                 PldParams p{beta, eta, iters, seed, track_best};
                 p.validate();
                 return p;
             }),
             py::arg("beta") = 160.0, py::arg("eta") = 0.8, py::arg("iters") = 100, py::arg("seed") = 0,
             py::arg("track_best") = true)
        .def_readwrite("beta", &PldParams::beta)
        .def_readwrite("eta", &PldParams::eta)
        .def_readwrite("iters", &PldParams::iters)
        .def_readwrite("seed", &PldParams::seed);
    py::class_<CpiParams>(m, "CpiParams")
        .def(py::init([](double eps, long long max_iters, double lmo_eps) {
                 CpiParams p;
                 p.eps = eps;
                 p.max_iters = max_iters;
                 p.lmo_eps = lmo_eps;
                 p.validate();
                 return p;
             }),
             py::arg("eps") = 1e-2, py::arg("max_iters") = 0, py::arg("lmo_eps") = 0.0)
        .def_readwrite("eps", &CpiParams::eps)
        .def_readwrite("max_iters", &CpiParams::max_iters);
    py::class_<PgdParams>(m, "PgdParams")
        .def(py::init([](double step, double value_tol, long long max_iters) {
                 return PgdParams{step, value_tol, max_iters};
             }),
             py::arg("step") = 0.0, py::arg("value_tol") = 2e-5, py::arg("max_iters") = 1000000);

    py::class_<PldResult>(m, "PldResult")
        .def_readonly("xi", &PldResult::xi)
        .def_readonly("kernel", &PldResult::kernel)
        .def_readonly("value", &PldResult::value)
        .def_readonly("trace", &PldResult::trace);
    py::class_<CpiResult>(m, "CpiResult")
        .def_readonly("kernel", &CpiResult::kernel)
        .def_readonly("value", &CpiResult::value)
        .def_readonly("final_gap", &CpiResult::final_gap)
        .def_readonly("iterations", &CpiResult::iterations)
        .def_readonly("iteration_bound", &CpiResult::iteration_bound)
        .def_readonly("trace", &CpiResult::trace);
    py::class_<PgdResult>(m, "PgdResult")
        .def_readonly("kernel", &PgdResult::kernel)
        .def_readonly("value", &PgdResult::value)
        .def_readonly("iterations", &PgdResult::iterations)
        .def_readonly("trace", &PgdResult::trace);

    m.def(
        "pld_evaluate",
        [](const MdpInstance& mdp, const StationaryPolicy& pi, const UncertaintySet& s, const PldParams& p,
           const Vec& w) {
            py::gil_scoped_release release;
            return pld_evaluate(mdp, pi, s, p, w);
        },
        py::arg("mdp"), py::arg("policy"), py::arg("set"), py::arg("params"), py::arg("weight"));
    m.def(
        "cpi_evaluate",
        [](const MdpInstance& mdp, const StationaryPolicy& pi, const UncertaintySet& s, const CpiParams& p,
           const Vec& w) {
            py::gil_scoped_release release;
            return cpi_evaluate(mdp, pi, s, p, w);
        },
        py::arg("mdp"), py::arg("policy"), py::arg("set"), py::arg("params"), py::arg("weight"));
    m.def(
        "pgd_baseline_evaluate",
        [](const MdpInstance& mdp, const StationaryPolicy& pi, const UncertaintySet& s, const PgdParams& p,
           const Vec& w) {
            py::gil_scoped_release release;
            return pgd_baseline_evaluate(mdp, pi, s, p, w);
        },
        py::arg("mdp"), py::arg("policy"), py::arg("set"), py::arg("params"), py::arg("weight"));
    m.def(
        "robust_vi_evaluate",
        [](const MdpInstance& mdp, const StationaryPolicy& pi, const UncertaintySet& s, double tol) {
            const auto r = robust_vi_evaluate(mdp, pi, s, tol);
            return py::make_tuple(r.v, r.worst, r.iterations);
        },
        py::arg("mdp"), py::arg("policy"), py::arg("set"), py::arg("tol") = 1e-9);
    m.def("cpi_iteration_bound", &cpi_iteration_bound, py::arg("gamma"), py::arg("eps"));

    // -- Robust improvement ---------------------------------------------------

    py::class_<ExactCritic>(m, "ExactCritic")
        .def(py::init([](double tol) { return ExactCritic{tol}; }), py::arg("tol") = 1e-8);
    py::class_<AcaParams>(m, "AcaParams")
        .def(py::init([](int iters, std::optional<double> eta, CriticConfig critic, std::uint64_t seed, bool ascent) {
                 AcaParams p;
                 p.iters = iters;
                 p.eta = eta;
                 p.critic = std::move(critic);
                 p.seed = seed;
                 p.ascent = ascent;
                 p.validate();
                 return p;
             }),
             py::arg("iters") = 100, py::arg("eta") = py::none(), py::arg("critic") = CriticConfig{ExactCritic{}},
             py::arg("seed") = 0, py::arg("ascent") = false);
    py::class_<ImprovementRecord>(m, "ImprovementRecord")
        .def_readonly("k", &ImprovementRecord::k)
        .def_readonly("critic_value", &ImprovementRecord::critic_value)
        .def_readonly("grad_norm", &ImprovementRecord::grad_norm)
        .def_readonly("policy_delta", &ImprovementRecord::policy_delta);
    py::class_<ImprovementTrace>(m, "ImprovementTrace")
        .def_readonly("records", &ImprovementTrace::records)
        .def_readonly("policies", &ImprovementTrace::policies)
        .def_readonly("final_policy", &ImprovementTrace::final_policy)
        .def_readonly("best_k", &ImprovementTrace::best_k)
        .def_readonly("running_average", &ImprovementTrace::running_average);
    m.def(
        "actor_critic",
        [](const MdpInstance& mdp, const UncertaintySet& s, const AcaParams& p, const Vec& w) {
            py::gil_scoped_release release;
            return actor_critic(mdp, s, p, w);
        },
        py::arg("mdp"), py::arg("set"), py::arg("params"), py::arg("weight"));
    m.def("policy_lipschitz", &policy_lipschitz);
    m.def("policy_smoothness", &policy_smoothness);

    // -- Environments ---------------------------------------------------------

    m.def(
        "build_gridworld",
        [](int side, double gamma) {
            GridWorldSpec spec;
            spec.side = side;
            spec.gamma = gamma;
            const auto g = build_gridworld(spec);
            return py::make_tuple(g.mdp, g.p_ref);
        },
        py::arg("side") = 5, py::arg("gamma") = 0.9);
    m.def(
        "gridworld_ellipsoid",
        [](int side, double radius) {
            GridWorldSpec spec;
            spec.side = side;
            return gridworld_ellipsoid(build_gridworld(spec), radius);
        },
        py::arg("side"), py::arg("radius"));
    m.def(
        "build_garnet",
        [](int S, int A, double b, double gamma, std::uint64_t seed) {
            GarnetSpec spec{S, A, b, gamma, seed};
            const auto g = build_garnet(spec);
            return py::make_tuple(g.mdp, g.p_ref, g.policy);
        },
        py::arg("num_states"), py::arg("num_actions"), py::arg("branching") = 1.0, py::arg("gamma") = 0.6,
        py::arg("seed") = 0);
    m.def(
        "build_machine_replacement",
        [](const std::string& map, std::optional<std::string> kernel_file) {
            MachineReplacementSpec spec;
            if (map == "dof5") {
                spec.map = MachineMap::dof5;
            } else if (map == "dof25") {
                spec.map = MachineMap::dof25;
            } else {
                throw py::value_error("map must be 'dof5' or 'dof25'");
            }
            spec.kernel_file = std::move(kernel_file);
            const auto mr = build_machine_replacement(spec);
            py::dict d;
            d["mdp"] = mr.mdp;
            d["map"] = mr.map;
            d["region"] = mr.region;
            d["p0"] = mr.p0;
            d["xi0"] = mr.xi0;
            d["exploration"] = mr.exploration;
            d["provenance"] = mr.provenance;
            return d;
        },
        py::arg("map") = "dof25", py::arg("kernel_file") = py::none());
    m.def(
        "sample_history",
        [](const MdpInstance& mdp, const TransitionKernel& k, const StationaryPolicy& pi, int n, std::uint64_t seed) {
            std::vector<std::pair<int, int>> out;
            for (const auto& sa : sample_history(mdp, k, pi, n, seed)) out.emplace_back(sa.s, sa.a);
            return out;
        },
        py::arg("mdp"), py::arg("kernel"), py::arg("policy"), py::arg("n"), py::arg("seed"));
}
