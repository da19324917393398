#include "rmdp/io.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>

namespace rmdp {

namespace {

Vec vec_from(const Json& j, const char* what) {
    if (!j.is_array()) fail(ErrorKind::validation, std::string(what) + " must be an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

Json vec_to(const Vec& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Mat mat_from(const Json& j, const char* what) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) fail(ErrorKind::validation, std::string(what) + " must be a nested array");
    const auto rows = static_cast<Eigen::Index>(j.size()), cols = static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols) fail(ErrorKind::validation, std::string(what) + " is ragged");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

Json mat_to(const Mat& m) {
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vec_to(m.row(r).transpose()));
    return out;
}

Json region_to(const ParamRegion& region) {
    Json blocks = Json::array();
    for (const auto& b : region.blocks)
        blocks.push_back({{"kind", b.kind == ParamBlock::Kind::box ? "box" : "solid_simplex"},
                          {"index", b.index}, {"lo", b.lo}, {"hi", b.hi}});
    return blocks;
}

ParamRegion region_from(const Json& j, int dim) {
    ParamRegion region = ParamRegion::unbounded(dim);
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "unit_box") return ParamRegion::box(dim, 0.0, 1.0);
        if (s == "none") return region;
        fail(ErrorKind::validation, "unknown region shorthand '" + s + "'");
    }
    for (const auto& b : j) {
        ParamBlock block;
        const auto kind = b.at("kind").get<std::string>();
        if (kind == "box") block.kind = ParamBlock::Kind::box;
        else if (kind == "solid_simplex") block.kind = ParamBlock::Kind::solid_simplex;
        else fail(ErrorKind::validation, "unknown region block kind '" + kind + "'");
        block.index = b.at("index").get<std::vector<int>>();
        block.lo = b.value("lo", 0.0);
        block.hi = b.value("hi", 1.0);
        for (int i : block.index)
            if (i < 0 || i >= dim) fail(ErrorKind::validation, "region index out of range");
        region.blocks.push_back(std::move(block));
    }
    return region;
}

}  // namespace

Json kernel_to_json(const TransitionKernel& kernel) {
    Json out = Json::array();
    for (int s = 0; s < kernel.S(); ++s) {
        Json per_action = Json::array();
        for (int a = 0; a < kernel.A(); ++a) per_action.push_back(vec_to(kernel.row(s, a).transpose()));
        out.push_back(std::move(per_action));
    }
    return out;
}

TransitionKernel kernel_from_json(const Json& nested) {
    if (!nested.is_array() || nested.empty() || !nested[0].is_array())
        fail(ErrorKind::validation, "kernel must be nested [s][a][s']");
    return kernel_from_json(nested, static_cast<int>(nested.size()), static_cast<int>(nested[0].size()));
}

TransitionKernel kernel_from_json(const Json& nested, int S, int A) {
    if (!nested.is_array() || static_cast<int>(nested.size()) != S) fail(ErrorKind::validation, "kernel must have S blocks");
    TransitionKernel k(S, A);
    for (int s = 0; s < S; ++s) {
        if (!nested[s].is_array() || static_cast<int>(nested[s].size()) != A)
            fail(ErrorKind::validation, "kernel block must have A rows");
        for (int a = 0; a < A; ++a) {
            const Vec row = vec_from(nested[s][a], "kernel row");
            if (row.size() != S) fail(ErrorKind::validation, "kernel row must have S entries");
            const double sum = row.sum();
            if (row.minCoeff() < -1e-9 || std::abs(sum - 1.0) > 1e-9 || !row.allFinite())
                fail(ErrorKind::validation, "kernel row (" + std::to_string(s) + "," + std::to_string(a) +
                                                ") is not a probability vector");
            k.row(s, a) = (row.cwiseMax(0.0) / row.cwiseMax(0.0).sum()).transpose();
        }
    }
    k.validate();
    return k;
}

Json to_json(const MdpInstance& mdp, const TransitionKernel& kernel) {
    return {{"S", mdp.S()}, {"A", mdp.A()}, {"gamma", mdp.gamma}, {"rho", vec_to(mdp.rho)},
            {"cost", mat_to(mdp.cost)}, {"kernel", kernel_to_json(kernel)}};
}

MdpWithKernel mdp_from_json(const Json& j) {
    MdpWithKernel out;
    try {
        out.mdp.num_states = j.at("S").get<int>();
        out.mdp.num_actions = j.at("A").get<int>();
        out.mdp.gamma = j.at("gamma").get<double>();
        out.mdp.cost = mat_from(j.at("cost"), "cost");
        if (j.contains("rho")) {
            out.mdp.rho = vec_from(j.at("rho"), "rho");
        } else {
            out.mdp.rho = Vec::Constant(out.mdp.num_states, 1.0 / out.mdp.num_states);
        }
        out.kernel = kernel_from_json(j.at("kernel"), out.mdp.num_states, out.mdp.num_actions);
    } catch (const Json::exception& e) {
        fail(ErrorKind::validation, std::string("malformed MDP document: ") + e.what());
    }
    if (out.mdp.cost.rows() != out.mdp.num_states || out.mdp.cost.cols() != out.mdp.num_actions)
        fail(ErrorKind::validation, "cost table must be S x A");
    out.mdp.validate();
    return out;
}

Json to_json(const UncertaintySet& set) {
    return std::visit([](const auto& u) -> Json {
        using T = std::decay_t<decltype(u)>;
        if constexpr (std::is_same_v<T, Singleton>) {
            return {{"kind", "singleton"}, {"kernel", kernel_to_json(u.p)}};
        } else if constexpr (std::is_same_v<T, SaRectL2>) {
            return {{"kind", "sa_l2"}, {"kernel", kernel_to_json(u.p_ref)}, {"radius", u.radius}};
        } else if constexpr (std::is_same_v<T, SRectL1>) {
            return {{"kind", "s_l1"}, {"kernel", kernel_to_json(u.p_ref)}, {"radius", u.radius}};
        } else {
            Json entries = Json::array();
            for (int k = 0; k < u.map.jacobian.outerSize(); ++k)
                for (SpMat::InnerIterator it(u.map.jacobian, k); it; ++it)
                    entries.push_back({it.row(), it.col(), it.value()});
            Json h = u.h.is_diagonal() ? Json{{"diag", vec_to(u.h.diag())}} : mat_to(u.h.to_dense());
            return {{"kind", "ellipsoid"}, {"S", u.map.num_states}, {"A", u.map.num_actions},
                    {"base", mat_to(u.map.base)},
                    {"jacobian", {{"rows", u.map.jacobian.rows()}, {"cols", u.map.jacobian.cols()}, {"entries", entries}}},
                    {"center", vec_to(u.center)}, {"H", h}, {"radius", u.radius}, {"region", region_to(u.region)}};
        }
    }, set);
}

UncertaintySet set_from_json(const Json& j) {
    UncertaintySet out;
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "singleton") {
            out = Singleton{kernel_from_json(j.at("kernel"))};
        } else if (kind == "sa_l2") {
            out = SaRectL2{kernel_from_json(j.at("kernel")), j.at("radius").get<double>()};
        } else if (kind == "s_l1") {
            out = SRectL1{kernel_from_json(j.at("kernel")), j.at("radius").get<double>()};
        } else if (kind == "ellipsoid") {
            EllipsoidParam e;
            e.map.num_states = j.at("S").get<int>();
            e.map.num_actions = j.at("A").get<int>();
            e.map.base = mat_from(j.at("base"), "base");
            const auto& jac = j.at("jacobian");
            std::vector<Eigen::Triplet<double>> t;
            for (const auto& entry : jac.at("entries"))
                t.emplace_back(entry.at(0).get<int>(), entry.at(1).get<int>(), entry.at(2).get<double>());
            e.map.jacobian.resize(jac.at("rows").get<int>(), jac.at("cols").get<int>());
            e.map.jacobian.setFromTriplets(t.begin(), t.end());
            e.center = vec_from(j.at("center"), "center");
            const auto& h = j.at("H");
            if (h.is_object()) e.h = QuadraticForm::diagonal(vec_from(h.at("diag"), "H.diag"));
            else e.h = QuadraticForm::dense(mat_from(h, "H"));
            e.radius = j.at("radius").get<double>();
            e.region = region_from(j.value("region", Json("none")), e.map.q());
            out = std::move(e);
        } else {
            fail(ErrorKind::validation, "unknown uncertainty set kind '" + kind + "'");
        }
    } catch (const Json::exception& e) {
        fail(ErrorKind::validation, std::string("malformed uncertainty set document: ") + e.what());
    }
    validate(out);
    return out;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::validation, "cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        fail(ErrorKind::validation, "cannot parse '" + path + "': " + e.what());
    }
}

void write_json_file(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::validation, "cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

void write_trace_csv(std::ostream& os, const RunTrace& trace) {
    os << kTraceCsvHeader << '\n' << std::setprecision(17);
    for (const auto& r : trace.records)
        os << r.iter << ',' << r.value << ',' << r.gap << ',' << r.step << ',' << r.elapsed_ns << '\n';
}

Json trace_summary(const RunTrace& trace) {
    return {{"algorithm", trace.algorithm}, {"params", trace.params}, {"seed", trace.seed},
            {"best_value", trace.best_value}, {"best_iter", trace.best_iter},
            {"iterations", trace.records.empty() ? 0 : trace.records.back().iter},
            {"termination", trace.termination}, {"wall_ms", trace.wall_ms}};
}

}  // namespace rmdp
