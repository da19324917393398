#include "rmdp/projections.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace rmdp {

Vec simplex_project(const Eigen::Ref<const Vec>& v) {
    if (!v.allFinite()) fail(ErrorKind::numerical, "simplex_project: non-finite input");
    const Eigen::Index n = v.size();
    require_dims(n > 0, "simplex_project: empty vector");
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        cum += u[k];
        const double t = (cum - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) theta = t;
    }
    return (v.array() - theta).max(0.0).matrix();
}

Vec l1_ball_project(const Eigen::Ref<const Vec>& v, double radius) {
    if (radius <= 0.0) return Vec::Zero(v.size());
    if (v.lpNorm<1>() <= radius) return v;
    const Vec mag = v.cwiseAbs();
    // Project |v| onto the simplex of mass `radius`, restore signs.
    const Vec w = simplex_project(mag / radius) * radius;
    Vec out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v[i] >= 0.0 ? w[i] : -w[i];
    return out;
}

namespace {

// x_i(tau) = max(0, z_i - tau / w_i); finds tau >= tau_min with sum x = 1 using sorted breakpoints.
Vec weighted_threshold(const Eigen::Ref<const Vec>& z, const Eigen::Ref<const Vec>& w) {
    const Eigen::Index n = z.size();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Coordinate i is positive while tau < z_i w_i.
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return z[a] * w[a] > z[b] * w[b]; });
    double sum_z = 0.0, sum_inv = 0.0, tau = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index i = order[k];
        sum_z += z[i];
        sum_inv += 1.0 / w[i];
        const double t = (sum_z - 1.0) / sum_inv;
        if (t < z[i] * w[i]) tau = t;
        else break;
    }
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = std::max(0.0, z[i] - tau / w[i]);
    return x;
}

}  // namespace

Vec weighted_solid_simplex_project(const Eigen::Ref<const Vec>& z, const Eigen::Ref<const Vec>& w) {
    if (!z.allFinite()) fail(ErrorKind::numerical, "weighted projection: non-finite input");
    const Vec clipped = z.cwiseMax(0.0);
    if (clipped.sum() <= 1.0) return clipped;
    return weighted_threshold(z, w);
}

Vec weighted_simplex_project(const Eigen::Ref<const Vec>& z, const Eigen::Ref<const Vec>& w) {
    if (!z.allFinite()) fail(ErrorKind::numerical, "weighted projection: non-finite input");
    return weighted_threshold(z, w);
}

double find_root(const std::function<double(double)>& f, double lo, double hi, double x_tol, int max_iter) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) fail(ErrorKind::numerical, "find_root: root not bracketed");
    boost::uintmax_t iters = static_cast<boost::uintmax_t>(max_iter);
    auto tol = [x_tol](double a, double b) {
        return std::abs(b - a) <= std::max(x_tol, 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)));
    };
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
    return 0.5 * (r.first + r.second);
}

}  // namespace rmdp
