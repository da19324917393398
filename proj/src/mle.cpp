#include "rmdp/mle.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <map>
#include <set>
#include <tuple>

namespace rmdp {

double chi2_quantile(int dof, double p) {
    if (dof < 1) fail(ErrorKind::validation, "chi-square degrees of freedom must be positive");
    if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::validation, "chi-square probability must lie in [0,1)");
    if (p == 0.0) return 0.0;
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), p);
}

namespace {

struct TransitionCount {
    int row = 0;    // s*A + a
    int next = 0;
    double count = 0.0;
    Eigen::SparseVector<double> grad;  // d P(next|row) / d xi
    double base = 0.0;
};

std::vector<TransitionCount> count_transitions(const AffineKernelMap& map, const History& history) {
    const int S = map.num_states, A = map.num_actions;
    std::map<std::pair<int, int>, double> counts;
    for (std::size_t t = 0; t + 1 < history.size(); ++t) {
        const auto [s, a] = history[t];
        const int next = history[t + 1].s;
        if (s < 0 || s >= S || a < 0 || a >= A || next < 0 || next >= S)
            fail(ErrorKind::validation, "history entry out of range");
        counts[{s * A + a, next}] += 1.0;
    }
    const SpMat jt = map.jacobian.transpose();  // q x (S*A*S), columns are per-entry gradients
    std::vector<TransitionCount> out;
    out.reserve(counts.size());
    for (const auto& [key, n] : counts) {
        TransitionCount tc;
        tc.row = key.first;
        tc.next = key.second;
        tc.count = n;
        tc.grad = jt.col(static_cast<Eigen::Index>(key.first) * S + key.second);
        tc.base = map.base(key.first, key.second);
        out.push_back(std::move(tc));
    }
    return out;
}

double entry(const TransitionCount& tc, const Vec& xi) { return tc.base + tc.grad.dot(xi); }

double log_likelihood(const std::vector<TransitionCount>& data, const Vec& xi) {
    double ll = 0.0;
    for (const auto& tc : data) {
        const double p = entry(tc, xi);
        if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
        ll += tc.count * std::log(p);
    }
    return ll;
}

/// l(b) - l(a) accumulated term by term so that tiny steps keep their sign.
double ll_increment(const std::vector<TransitionCount>& data, const Vec& from, const Vec& to) {
    double inc = 0.0;
    for (const auto& tc : data) {
        const double p = entry(tc, from), q = entry(tc, to);
        if (!(q > 0.0)) return -std::numeric_limits<double>::infinity();
        inc += tc.count * std::log1p((q - p) / p);
    }
    return inc;
}

Vec ll_gradient(const std::vector<TransitionCount>& data, const Vec& xi) {
    Vec g = Vec::Zero(xi.size());
    for (const auto& tc : data) g += (tc.count / entry(tc, xi)) * tc.grad;
    return g;
}

Vec region_barycenter(const ParamRegion& region) {
    Vec x = Vec::Zero(region.dim);
    for (const auto& b : region.blocks) {
        for (int i : b.index) {
            if (b.kind == ParamBlock::Kind::box) x[i] = 0.5 * (b.lo + b.hi);
            else x[i] = 1.0 / (static_cast<double>(b.index.size()) + 1.0);
        }
    }
    return x;
}

}  // namespace

MleFit mle_fit(const AffineKernelMap& map, const ParamRegion& region, const History& history, double tol, int max_iter) {
    if (history.size() < 2) fail(ErrorKind::validation, "mle_fit needs a history of length >= 2");
    require_dims(region.dim == map.q(), "region dimension does not match the affine map");
    const auto data = count_transitions(map, history);
    MleFit fit;
    fit.transitions = static_cast<int>(history.size()) - 1;

    // Parameters touched by at least one visited row.
    std::set<int> visited_rows;
    for (std::size_t t = 0; t + 1 < history.size(); ++t) visited_rows.insert(history[t].s * map.num_actions + history[t].a);
    std::vector<bool> touched(map.q(), false);
    for (int k = 0; k < map.jacobian.outerSize(); ++k)
        for (SpMat::InnerIterator it(map.jacobian, k); it; ++it)
            if (it.value() != 0.0 && visited_rows.count(static_cast<int>(it.row() / map.num_states))) touched[k] = true;

    Vec xi = region_barycenter(region);
    const Vec fallback = region.project(Vec::Zero(map.q()));
    for (int i = 0; i < map.q(); ++i)
        if (!touched[i]) { xi[i] = fallback[i]; fit.unvisited.push_back(i); }
    double ll = log_likelihood(data, xi);
    if (!std::isfinite(ll)) fail(ErrorKind::validation, "history has zero likelihood under the structural map");

    const double n = static_cast<double>(fit.transitions);
    Vec g = ll_gradient(data, xi) / n;
    double step = 1.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        fit.residual = (region.project(xi + g) - xi).lpNorm<Eigen::Infinity>();
        if (fit.residual <= tol) break;
        // Spectral step with Armijo backtracking along the projected arc.
        double t = step;
        Vec cand;
        double inc = -std::numeric_limits<double>::infinity();
        for (int bt = 0; bt < 60; ++bt) {
            cand = region.project(xi + t * g);
            inc = ll_increment(data, xi, cand);
            if (inc / n >= 1e-4 * g.dot(cand - xi)) break;
            t *= 0.5;
        }
        if (!(inc >= 0.0)) break;
        const double cand_ll = ll + inc;
        const Vec g_new = ll_gradient(data, cand) / n;
        const Vec s = cand - xi, y = g_new - g;
        const double sy = s.dot(y);
        step = sy < 0.0 ? std::clamp(-s.squaredNorm() / sy, 1e-10, 1e10) : 1e3;
        xi = cand;
        ll = cand_ll;
        g = g_new;
    }
    fit.xi = xi;
    fit.log_likelihood = ll;
    fit.iterations = it;
    if (fit.residual > tol) throw ConvergenceError("mle_fit did not reach the residual tolerance", fit.residual, ll);
    return fit;
}

Mat observed_information(const AffineKernelMap& map, const History& history, const Vec& xi) {
    const auto data = count_transitions(map, history);
    Mat h = Mat::Zero(map.q(), map.q());
    for (const auto& tc : data) {
        const double p = entry(tc, xi);
        if (!(p > 0.0)) fail(ErrorKind::numerical, "observed transition has zero probability at xi");
        const Vec gdense = tc.grad;
        h.noalias() += (tc.count / (p * p)) * gdense * gdense.transpose();
    }
    return h;
}

EllipsoidParam confidence_ellipsoid(const AffineKernelMap& map, const ParamRegion& region, const History& history,
                                    const ConfidenceOptions& opts) {
    return confidence_ellipsoid(map, region, mle_fit(map, region, history), history, opts);
}

EllipsoidParam confidence_ellipsoid(const AffineKernelMap& map, const ParamRegion& region, const MleFit& fit,
                                    const History& history, const ConfidenceOptions& opts) {
    if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) fail(ErrorKind::validation, "alpha must lie in (0,1)");
    const int dof = opts.dof > 0 ? opts.dof : map.num_states - 1;
    Mat h = observed_information(map, history, fit.xi);
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < 1e-8) h.diagonal().array() += 1e-8;
    EllipsoidParam set;
    set.map = map;
    set.center = fit.xi;
    const bool diagonal = (h - Mat(h.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    set.h = diagonal ? QuadraticForm::diagonal(h.diagonal()) : QuadraticForm::dense(h);
    if (!(set.h.lambda_min() > 0.0)) fail(ErrorKind::numerical, "information matrix is singular after regularization");
    set.radius = chi2_quantile(dof, 1.0 - opts.alpha);
    set.region = region;
    return set;
}

}  // namespace rmdp
