#include "rmdp/uncertainty.hpp"
#include "rmdp/mdp_core.hpp"
#include "rmdp/projections.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rmdp {

// ---------------------------------------------------------------------------
// AffineKernelMap

TransitionKernel AffineKernelMap::kernel(const Vec& xi) const {
    require_dims(xi.size() == q(), "parameter dimension does not match the affine map");
    TransitionKernel k(num_states, num_actions, base);
    k.flat() += jacobian * xi;
    return k;
}

Vec AffineKernelMap::pullback(const RowMat& kernel_grad) const {
    require_dims(kernel_grad.rows() == base.rows() && kernel_grad.cols() == base.cols(),
                 "kernel gradient shape does not match the affine map");
    const Eigen::Map<const Vec> flat(kernel_grad.data(), kernel_grad.size());
    return jacobian.transpose() * flat;
}

Vec AffineKernelMap::coordinates(const TransitionKernel& kernel) const {
    require_dims(kernel.S() == num_states && kernel.A() == num_actions, "kernel shape does not match the affine map");
    const Eigen::Map<const Vec> base_flat(base.data(), base.size());
    const Vec rhs = jacobian.transpose() * (kernel.flat() - base_flat);
    const SpMat normal = jacobian.transpose() * jacobian;
    Eigen::SimplicialLDLT<SpMat> ldlt(normal);
    if (ldlt.info() != Eigen::Success) fail(ErrorKind::numerical, "affine map Jacobian is rank deficient");
    return ldlt.solve(rhs);
}

AffineKernelMap AffineKernelMap::identity(int num_states, int num_actions) {
    AffineKernelMap m;
    m.num_states = num_states;
    m.num_actions = num_actions;
    m.base = RowMat::Zero(num_states * num_actions, num_states);
    const int n = num_states * num_actions * num_states;
    m.jacobian.resize(n, n);
    m.jacobian.setIdentity();
    return m;
}

AffineKernelMap AffineKernelMap::drop_last(int num_states, int num_actions) {
    require_dims(num_states >= 2, "drop_last map needs at least two states");
    AffineKernelMap m;
    m.num_states = num_states;
    m.num_actions = num_actions;
    m.base = RowMat::Zero(num_states * num_actions, num_states);
    m.base.col(num_states - 1).setOnes();
    const int rows = num_states * num_actions;
    const int per_row = num_states - 1;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(rows) * per_row * 2);
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < per_row; ++j) {
            const int col = r * per_row + j;
            t.emplace_back(r * num_states + j, col, 1.0);
            t.emplace_back(r * num_states + num_states - 1, col, -1.0);
        }
    m.jacobian.resize(rows * num_states, rows * per_row);
    m.jacobian.setFromTriplets(t.begin(), t.end());
    return m;
}

// ---------------------------------------------------------------------------
// ParamRegion

ParamRegion ParamRegion::unbounded(int dim) { return {dim, {}}; }

ParamRegion ParamRegion::box(int dim, double lo, double hi) {
    ParamBlock b;
    b.kind = ParamBlock::Kind::box;
    b.index.resize(dim);
    std::iota(b.index.begin(), b.index.end(), 0);
    b.lo = lo;
    b.hi = hi;
    return {dim, {b}};
}

ParamRegion ParamRegion::solid_simplices(int dim, const std::vector<std::vector<int>>& groups) {
    ParamRegion r{dim, {}};
    for (const auto& g : groups) {
        ParamBlock b;
        b.kind = ParamBlock::Kind::solid_simplex;
        b.index = g;
        r.blocks.push_back(std::move(b));
    }
    return r;
}

namespace {

Vec gather(const Vec& x, const std::vector<int>& idx) {
    Vec out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = x[idx[i]];
    return out;
}

void scatter(Vec& x, const std::vector<int>& idx, const Vec& vals) {
    for (std::size_t i = 0; i < idx.size(); ++i) x[idx[i]] = vals[static_cast<Eigen::Index>(i)];
}

}  // namespace

Vec ParamRegion::project(const Vec& x) const {
    return project_weighted(x, Vec::Ones(x.size()));
}

Vec ParamRegion::project_weighted(const Vec& z, const Vec& w) const {
    require_dims(z.size() == dim && w.size() == dim, "parameter dimension does not match the region");
    Vec out = z;
    for (const auto& b : blocks) {
        if (b.kind == ParamBlock::Kind::box) {
            for (int i : b.index) out[i] = std::clamp(z[i], b.lo, b.hi);
        } else {
            scatter(out, b.index, weighted_solid_simplex_project(gather(z, b.index), gather(w, b.index)));
        }
    }
    return out;
}

double ParamRegion::violation(const Vec& x) const {
    require_dims(x.size() == dim, "parameter dimension does not match the region");
    double worst = 0.0;
    for (const auto& b : blocks) {
        if (b.kind == ParamBlock::Kind::box) {
            for (int i : b.index) worst = std::max({worst, b.lo - x[i], x[i] - b.hi});
        } else {
            double sum = 0.0;
            for (int i : b.index) {
                worst = std::max(worst, -x[i]);
                sum += x[i];
            }
            worst = std::max(worst, sum - 1.0);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// QuadraticForm

QuadraticForm QuadraticForm::diagonal(Vec diag) {
    QuadraticForm f;
    f.is_diag_ = true;
    f.diag_ = std::move(diag);
    f.lmin_ = f.diag_.size() ? f.diag_.minCoeff() : 0.0;
    f.lmax_ = f.diag_.size() ? f.diag_.maxCoeff() : 0.0;
    return f;
}

QuadraticForm QuadraticForm::dense(Mat m) {
    require_dims(m.rows() == m.cols(), "H must be square");
    if (!m.isApprox(m.transpose(), 1e-10)) fail(ErrorKind::validation, "H must be symmetric");
    QuadraticForm f;
    f.is_diag_ = false;
    f.dense_ = 0.5 * (m + m.transpose());
    f.diag_ = f.dense_.diagonal();
    Eigen::SelfAdjointEigenSolver<Mat> es(f.dense_, Eigen::EigenvaluesOnly);
    f.lmin_ = es.eigenvalues().minCoeff();
    f.lmax_ = es.eigenvalues().maxCoeff();
    return f;
}

Mat QuadraticForm::to_dense() const { return is_diag_ ? Mat(diag_.asDiagonal()) : dense_; }

double QuadraticForm::eval(const Vec& x) const {
    if (is_diag_) return (x.array().square() * diag_.array()).sum();
    return x.dot(dense_ * x);
}

Vec QuadraticForm::apply(const Vec& x) const {
    if (is_diag_) return diag_.cwiseProduct(x);
    return dense_ * x;
}

// ---------------------------------------------------------------------------
// Set metadata

const char* kind_name(const UncertaintySet& set) {
    return std::visit([](const auto& s) -> const char* {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SaRectL2>) return "sa_l2";
        else if constexpr (std::is_same_v<T, SRectL1>) return "s_l1";
        else if constexpr (std::is_same_v<T, EllipsoidParam>) return "ellipsoid";
        else return "singleton";
    }, set);
}

bool is_s_rectangular(const UncertaintySet& set) { return !std::holds_alternative<EllipsoidParam>(set); }

int set_num_states(const UncertaintySet& set) {
    return std::visit([](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, EllipsoidParam>) return s.map.num_states;
        else if constexpr (std::is_same_v<T, Singleton>) return s.p.S();
        else return s.p_ref.S();
    }, set);
}

int set_num_actions(const UncertaintySet& set) {
    return std::visit([](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, EllipsoidParam>) return s.map.num_actions;
        else if constexpr (std::is_same_v<T, Singleton>) return s.p.A();
        else return s.p_ref.A();
    }, set);
}

TransitionKernel nominal_kernel(const UncertaintySet& set) {
    return std::visit([](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, EllipsoidParam>) return s.map.kernel(s.center);
        else if constexpr (std::is_same_v<T, Singleton>) return s.p;
        else return s.p_ref;
    }, set);
}

void validate(const UncertaintySet& set) {
    std::visit([](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Singleton>) {
            s.p.validate(1e-12);
        } else if constexpr (std::is_same_v<T, EllipsoidParam>) {
            if (!(s.radius >= 0.0)) fail(ErrorKind::validation, "ellipsoid radius must be nonnegative");
            const int q = s.map.q();
            if (s.center.size() != q || s.h.dim() != q || s.region.dim != q)
                fail(ErrorKind::dimension, "ellipsoid center, H and region must match the map dimension");
            if (!(s.h.lambda_min() > 0.0)) fail(ErrorKind::validation, "H must be positive definite");
            if (s.region.violation(s.center) > 1e-12) fail(ErrorKind::validation, "ellipsoid center lies outside the region");
            s.map.kernel(s.center).validate(1e-9);
        } else {
            if (!(s.radius >= 0.0)) fail(ErrorKind::validation, "radius must be nonnegative");
            s.p_ref.validate(1e-12);
        }
    }, set);
}

// ---------------------------------------------------------------------------
// (s,a)-rectangular l2 ball intersected with the simplex

namespace {

Vec shrink_into_ball(const Vec& p, const Vec& center, double radius) {
    const double dist = (p - center).norm();
    if (dist <= radius || dist == 0.0) return p;
    return center + (radius / dist) * (p - center);
}

Vec l2_row_project(const Vec& y, const Vec& ref, double radius) {
    if (radius <= 0.0) return ref;
    const Vec p0 = simplex_project(y);
    if ((p0 - ref).norm() <= radius) return p0;
    // p(theta) = Proj((1-theta) y + theta ref); distance to ref decreases in theta.
    auto f = [&](double theta) { return (simplex_project((1.0 - theta) * y + theta * ref) - ref).norm() - radius; };
    const double theta = find_root(f, 0.0, 1.0, 1e-16);
    return shrink_into_ball(simplex_project((1.0 - theta) * y + theta * ref), ref, radius);
}

Vec l2_row_lmo(const Vec& g, const Vec& ref, double radius) {
    if (radius <= 0.0) return ref;
    const double gmax = g.maxCoeff();
    const double tie = 1e-15 * std::max(1.0, std::abs(gmax));
    std::vector<int> top;
    for (Eigen::Index i = 0; i < g.size(); ++i)
        if (g[i] >= gmax - tie) top.push_back(static_cast<int>(i));
    Vec limit = Vec::Zero(g.size());
    scatter(limit, top, simplex_project(gather(ref, top)));
    if ((limit - ref).norm() <= radius) return limit;
    // Maximizer is Proj(ref + t g) at the t where the ball constraint binds.
    auto path = [&](double t) { return simplex_project(ref + t * g); };
    auto f = [&](double t) { return (path(t) - ref).norm() - radius; };
    const double spread = (g.array() - g.mean()).matrix().norm();
    double hi = radius / std::max(spread, 1e-300);
    for (int k = 0; k < 200 && f(hi) <= 0.0; ++k) hi *= 2.0;
    const double t = find_root(f, 0.0, hi, 0.0);
    return shrink_into_ball(path(t), ref, radius);
}

// ---------------------------------------------------------------------------
// s-rectangular l1 ball intersected with the product of simplices

/// Exact LMO for one state's block: fractional knapsack over mass moves toward each row's argmax.
RowMat l1_state_lmo(const RowMat& g, const RowMat& ref, double radius) {
    const int A = static_cast<int>(g.rows()), S = static_cast<int>(g.cols());
    RowMat p = ref;
    std::vector<int> best(A);
    struct Move { double gain; int a; int i; };
    std::vector<Move> moves;
    for (int a = 0; a < A; ++a) {
        Eigen::Index j;
        g.row(a).maxCoeff(&j);  // lowest index among ties
        best[a] = static_cast<int>(j);
        for (int i = 0; i < S; ++i) {
            const double gain = g(a, j) - g(a, i);
            if (i != j && ref(a, i) > 0.0 && gain > 0.0) moves.push_back({gain, a, i});
        }
    }
    std::stable_sort(moves.begin(), moves.end(), [](const Move& x, const Move& y) { return x.gain > y.gain; });
    double budget = 0.5 * radius;  // moving mass m costs 2m in l1
    for (const auto& m : moves) {
        if (budget <= 0.0) break;
        const double amount = std::min(budget, ref(m.a, m.i));
        p(m.a, m.i) -= amount;
        p(m.a, best[m.a]) += amount;
        budget -= amount;
    }
    return p;
}

double rows_simplex_residual(const RowMat& x) {
    double worst = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        worst = std::max(worst, std::abs(x.row(r).sum() - 1.0));
        worst = std::max(worst, -x.row(r).minCoeff());
    }
    return worst;
}

RowMat rows_simplex_project(const RowMat& x) {
    RowMat out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) out.row(r) = simplex_project(x.row(r).transpose()).transpose();
    return out;
}

/// argmin over the simplex of 1/2 ||x - y||^2 + lam ||x - ref||_1. Each coordinate is a shifted
/// soft threshold of y - mu, clipped at 0; the row sum is piecewise linear and decreasing in the
/// multiplier mu, so the root is found exactly by sweeping the breakpoints. The breakpoints are
/// d - lam, d + lam and y + lam with d = y - ref; each family keeps its order as lam varies, so
/// sorting once per row leaves a linear merge per evaluation.
class L1RowProx {
public:
    L1RowProx(const Eigen::RowVectorXd& y, const Eigen::RowVectorXd& ref) : y_(y), ref_(ref) {
        d_.resize(y.size());
        ys_.resize(y.size());
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            d_[i] = y[i] - ref[i];
            ys_[i] = y[i];
        }
        std::sort(d_.begin(), d_.end());
        std::sort(ys_.begin(), ys_.end());
        y_sum_ = y.sum();
    }

    Eigen::RowVectorXd operator()(double lam) const {
        const std::size_t n = d_.size();
        const double inf = std::numeric_limits<double>::infinity();
        std::size_t i = 0, j = 0, k = 0;
        // Next breakpoint from the three sorted families, with its slope change.
        auto next_event = [&](double& at, int& delta) {
            const double a = i < n ? d_[i] - lam : inf;
            const double b = j < n ? d_[j] + lam : inf;
            const double c = k < n ? ys_[k] + lam : inf;
            if (a <= b && a <= c) { at = a; delta = 1; ++i; }
            else if (b <= c) { at = b; delta = -1; ++j; }
            else { at = c; delta = 1; ++k; }
        };
        // Below every breakpoint each coordinate equals y_i - lam - mu.
        double slope = -static_cast<double>(n);
        double mu = std::min(d_.front() - lam, ys_.front() + lam);
        double sum = y_sum_ - static_cast<double>(n) * (lam + mu);
        if (sum <= 1.0) {
            mu -= (1.0 - sum) / static_cast<double>(n);
        } else {
            double at = 0.0;
            int delta = 0;
            next_event(at, delta);
            for (std::size_t e = 0; e < 3 * n; ++e) {
                slope += delta;
                double next = inf;
                if (e + 1 < 3 * n) next_event(next, delta);
                const double s_next = slope < 0.0 ? sum + slope * (next - mu) : sum;
                if (s_next <= 1.0) {
                    mu += (1.0 - sum) / slope;
                    break;
                }
                mu = next;
                sum = s_next;
            }
        }
        Eigen::RowVectorXd x(y_.size());
        for (Eigen::Index t = 0; t < y_.size(); ++t) {
            const double z = y_[t] - ref_[t] - mu;
            const double v = z > lam ? z - lam : (z < -lam ? z + lam : 0.0);
            x[t] = std::max(0.0, ref_[t] + v);
        }
        return x;
    }

private:
    Eigen::RowVectorXd y_, ref_;
    std::vector<double> d_, ys_;
    double y_sum_ = 0.0;
};

/// Projection onto {X : rows on the simplex, ||X - ref||_1 <= r} through the multiplier lam of
/// the l1 constraint; the l1 distance of the row-wise prox is nonincreasing in lam.
RowMat l1_state_project(const RowMat& y, const RowMat& ref, double radius) {
    if (radius <= 0.0) return ref;
    if (rows_simplex_residual(y) <= 0.0 && (y - ref).cwiseAbs().sum() <= radius) return y;
    RowMat x = rows_simplex_project(y);
    if ((x - ref).cwiseAbs().sum() <= radius) return x;
    std::vector<L1RowProx> rows;
    rows.reserve(static_cast<std::size_t>(y.rows()));
    for (Eigen::Index r = 0; r < y.rows(); ++r) rows.emplace_back(y.row(r), ref.row(r));
    auto prox = [&](double lam) {
        RowMat out(y.rows(), y.cols());
        for (Eigen::Index r = 0; r < y.rows(); ++r) out.row(r) = rows[static_cast<std::size_t>(r)](lam);
        return out;
    };
    double lo = 0.0, hi = (y - ref).cwiseAbs().maxCoeff();
    RowMat x_hi = ref;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        x = prox(mid);
        if ((x - ref).cwiseAbs().sum() <= radius) {
            hi = mid;
            x_hi = std::move(x);
        } else {
            lo = mid;
        }
    }
    return x_hi;
}

RowMat block_of(const RowMat& m, int s, int A) { return m.middleRows(static_cast<Eigen::Index>(s) * A, A); }

// ---------------------------------------------------------------------------
// Ellipsoid in parameter space intersected with the region Xi0

/// argmin 1/2 x^T (alpha I + beta H) x - b^T x over the region.
class RegionQp {
public:
    RegionQp(const EllipsoidParam& set) : set_(set) {
        all_box_ = std::all_of(set.region.blocks.begin(), set.region.blocks.end(),
                               [](const ParamBlock& b) { return b.kind == ParamBlock::Kind::box; });
        lo_ = Vec::Constant(set.region.dim, -std::numeric_limits<double>::infinity());
        hi_ = Vec::Constant(set.region.dim, std::numeric_limits<double>::infinity());
        for (const auto& b : set.region.blocks)
            if (b.kind == ParamBlock::Kind::box)
                for (int i : b.index) { lo_[i] = b.lo; hi_[i] = b.hi; }
        if (!set.h.is_diagonal()) dense_ = set.h.to_dense();
    }

    Vec solve(double alpha, double beta, const Vec& b, const Vec& warm) const {
        const QuadraticForm& h = set_.h;
        if (h.is_diagonal()) {
            const Vec w = (alpha + beta * h.diag().array()).matrix();
            return set_.region.project_weighted(b.cwiseQuotient(w), w);
        }
        return all_box_ ? coordinate_descent(alpha, beta, b, warm) : accelerated_gradient(alpha, beta, b, warm);
    }

private:
    Vec coordinate_descent(double alpha, double beta, const Vec& b, const Vec& warm) const {
        const Eigen::Index n = b.size();
        Vec x = warm;
        Vec qx = alpha * x + beta * (dense_ * x);
        for (int sweep = 0; sweep < 100000; ++sweep) {
            double change = 0.0, scale = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double qii = alpha + beta * dense_(i, i);
                const double target = x[i] + (b[i] - qx[i]) / qii;
                const double xi = std::clamp(target, lo_[i], hi_[i]);
                const double d = xi - x[i];
                if (d != 0.0) {
                    qx += beta * d * dense_.col(i);
                    qx[i] += alpha * d;
                    x[i] = xi;
                }
                change = std::max(change, std::abs(d));
                scale = std::max(scale, std::abs(xi));
            }
            if (change <= 1e-15 * std::max(1.0, scale)) break;
        }
        return x;
    }

    Vec accelerated_gradient(double alpha, double beta, const Vec& b, const Vec& warm) const {
        const double lip = alpha + beta * set_.h.lambda_max();
        Vec x = set_.region.project(warm), y = x;
        double t = 1.0;
        for (int it = 0; it < 200000; ++it) {
            const Vec grad = alpha * y + beta * (dense_ * y) - b;
            const Vec xn = set_.region.project(y - grad / lip);
            const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            y = xn + ((t - 1.0) / tn) * (xn - x);
            const double change = (xn - x).lpNorm<Eigen::Infinity>();
            x = xn;
            t = tn;
            if (change <= 1e-15 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) break;
        }
        return x;
    }

    const EllipsoidParam& set_;
    bool all_box_ = true;
    Vec lo_, hi_;
    Mat dense_;
};

Vec shrink_into_ellipsoid(const EllipsoidParam& set, const Vec& xi) {
    const Vec d = xi - set.center;
    const double val = set.h.eval(d);
    if (val <= set.radius || val == 0.0) return xi;
    return set.center + std::sqrt(set.radius / val) * d;
}

double dual_norm(const QuadraticForm& h, const Vec& c) {
    if (h.is_diagonal()) return std::sqrt((c.array().square() / h.diag().array()).sum());
    return std::sqrt(c.dot(h.to_dense().llt().solve(c)));
}

struct ParamLmo {
    Vec xi;
    double value = 0.0;
    double gap = 0.0;
};

/// max c^T xi over the set, through the scalar Lagrangian dual of the ellipsoid constraint.
ParamLmo ellipsoid_param_lmo(const EllipsoidParam& set, const Vec& c, double) {
    const Vec& c0 = set.center;
    const double r = set.radius;
    if (r <= 0.0 || c.lpNorm<Eigen::Infinity>() == 0.0) return {c0, c.dot(c0), 0.0};
    const RegionQp qp(set);
    const Vec hc0 = set.h.apply(c0);
    Vec warm = c0;
    // maximize c^T x - mu (x-c0)^T H (x-c0)  <=>  minimize mu x^T H x - (c + 2 mu H c0)^T x
    auto inner = [&](double mu) {
        Vec x = qp.solve(0.0, 2.0 * mu, c + 2.0 * mu * hc0, warm);
        warm = x;
        return x;
    };
    auto psi = [&](double log_mu) { return set.h.eval(inner(std::exp(log_mu)) - c0) - r; };
    const double mu0 = dual_norm(set.h, c) / (2.0 * std::sqrt(r));
    double hi = std::log(mu0) + 0.01;
    for (int k = 0; k < 60 && psi(hi) > 0.0; ++k) hi += 1.0;
    double lo = std::log(mu0) - 1.0;
    bool bracketed = false;
    for (int k = 0; k < 40; ++k, lo -= 1.0) {
        if (psi(lo) > 0.0) { bracketed = true; break; }
    }
    double mu = std::exp(lo);
    if (bracketed) mu = std::exp(find_root(psi, lo, hi, 1e-13));
    const Vec x = inner(mu);
    const Vec feasible = shrink_into_ellipsoid(set, x);
    const double dual = mu * r + c.dot(x) - mu * set.h.eval(x - c0);
    const double primal = c.dot(feasible);
    return {feasible, primal, std::max(0.0, dual - primal)};
}

Vec ellipsoid_project(const EllipsoidParam& set, const Vec& y) {
    require_dims(y.size() == set.map.q(), "parameter dimension does not match the set");
    const Vec& c0 = set.center;
    if (set.radius <= 0.0) return c0;
    const Vec x0 = set.region.project(y);
    if (set.h.eval(x0 - c0) <= set.radius) return x0;
    const RegionQp qp(set);
    const Vec hc0 = set.h.apply(c0);
    Vec warm = x0;
    auto inner = [&](double mu) {
        Vec x = qp.solve(1.0, 2.0 * mu, y + 2.0 * mu * hc0, warm);
        warm = x;
        return x;
    };
    auto psi = [&](double mu) { return set.h.eval(inner(mu) - c0) - set.radius; };
    double hi = 1.0 / std::max(set.h.lambda_max(), 1e-300);
    for (int k = 0; k < 400 && psi(hi) > 0.0; ++k) hi *= 4.0;
    const double mu = find_root(psi, 0.0, hi, 0.0);
    return shrink_into_ellipsoid(set, inner(mu));
}

RowMat zero_except_state(const RowMat& grad, int s, int A) {
    RowMat out = RowMat::Zero(grad.rows(), grad.cols());
    out.middleRows(static_cast<Eigen::Index>(s) * A, A) = grad.middleRows(static_cast<Eigen::Index>(s) * A, A);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public oracles

TransitionKernel project(const UncertaintySet& set, const TransitionKernel& point, const OracleOptions& /*opts*/) {
    const int S = set_num_states(set), A = set_num_actions(set);
    require_dims(point.S() == S && point.A() == A, "point shape does not match the uncertainty set");
    return std::visit([&](const auto& u) -> TransitionKernel {
        using T = std::decay_t<decltype(u)>;
        if constexpr (std::is_same_v<T, Singleton>) {
            return u.p;
        } else if constexpr (std::is_same_v<T, SaRectL2>) {
            TransitionKernel out(S, A);
            for (int r = 0; r < S * A; ++r)
                out.matrix().row(r) = l2_row_project(point.matrix().row(r).transpose(),
                                                     u.p_ref.matrix().row(r).transpose(), u.radius).transpose();
            return out;
        } else if constexpr (std::is_same_v<T, SRectL1>) {
            TransitionKernel out(S, A);
            for (int s = 0; s < S; ++s)
                out.matrix().middleRows(static_cast<Eigen::Index>(s) * A, A) =
                    l1_state_project(block_of(point.matrix(), s, A), block_of(u.p_ref.matrix(), s, A), u.radius);
            return out;
        } else {
            fail(ErrorKind::unsupported, "ellipsoidal sets are projected in parameter space (project_param)");
        }
    }, set);
}

Vec project_param(const EllipsoidParam& set, const Vec& xi, const OracleOptions&) {
    return ellipsoid_project(set, xi);
}

LmoResult linear_max_oracle(const UncertaintySet& set, const RowMat& grad, double eps, const OracleOptions& opts) {
    if (!(eps > 0.0)) fail(ErrorKind::validation, "LMO tolerance must be positive");
    const int S = set_num_states(set), A = set_num_actions(set);
    require_dims(grad.rows() == S * A && grad.cols() == S, "gradient shape does not match the uncertainty set");
    if (!grad.allFinite()) fail(ErrorKind::numerical, "LMO gradient contains non-finite entries");
    LmoResult out;
    std::visit([&](const auto& u) {
        using T = std::decay_t<decltype(u)>;
        if constexpr (std::is_same_v<T, Singleton>) {
            out.maximizer = u.p;
        } else if constexpr (std::is_same_v<T, SaRectL2>) {
            out.maximizer = TransitionKernel(S, A);
            for (int r = 0; r < S * A; ++r)
                out.maximizer.matrix().row(r) = l2_row_lmo(grad.row(r).transpose(),
                                                           u.p_ref.matrix().row(r).transpose(), u.radius).transpose();
        } else if constexpr (std::is_same_v<T, SRectL1>) {
            out.maximizer = TransitionKernel(S, A);
            for (int s = 0; s < S; ++s)
                out.maximizer.matrix().middleRows(static_cast<Eigen::Index>(s) * A, A) =
                    l1_state_lmo(block_of(grad, s, A), block_of(u.p_ref.matrix(), s, A), u.radius);
        } else {
            const Vec c = u.map.pullback(grad);
            const ParamLmo res = ellipsoid_param_lmo(u, c, eps);
            if (res.gap > eps) throw ConvergenceError("ellipsoid LMO did not certify the requested tolerance", res.gap, res.value);
            out.maximizer = u.map.kernel(res.xi);
            out.xi = res.xi;
            out.certified_gap = res.gap;
        }
    }, set);
    (void)opts;
    out.value = inner(grad, out.maximizer.matrix());
    return out;
}

Membership membership_param(const EllipsoidParam& set, const Vec& xi, double tol) {
    require_dims(xi.size() == set.map.q(), "parameter dimension does not match the set");
    Membership m;
    m.residual = std::max({0.0, set.region.violation(xi), set.h.eval(xi - set.center) - set.radius,
                           set.map.kernel(xi).stochasticity_residual()});
    m.inside = m.residual <= tol;
    return m;
}

Membership membership(const UncertaintySet& set, const TransitionKernel& point, double tol) {
    const int S = set_num_states(set), A = set_num_actions(set);
    require_dims(point.S() == S && point.A() == A, "point shape does not match the uncertainty set");
    Membership m;
    m.residual = std::visit([&](const auto& u) -> double {
        using T = std::decay_t<decltype(u)>;
        if constexpr (std::is_same_v<T, Singleton>) {
            return (point.matrix() - u.p.matrix()).cwiseAbs().maxCoeff();
        } else if constexpr (std::is_same_v<T, SaRectL2>) {
            double worst = point.stochasticity_residual();
            for (int r = 0; r < S * A; ++r)
                worst = std::max(worst, (point.matrix().row(r) - u.p_ref.matrix().row(r)).norm() - u.radius);
            return worst;
        } else if constexpr (std::is_same_v<T, SRectL1>) {
            double worst = point.stochasticity_residual();
            for (int s = 0; s < S; ++s)
                worst = std::max(worst, (block_of(point.matrix(), s, A) - block_of(u.p_ref.matrix(), s, A)).cwiseAbs().sum() - u.radius);
            return worst;
        } else {
            const Vec xi = u.map.coordinates(point);
            const double recon = (u.map.kernel(xi).matrix() - point.matrix()).cwiseAbs().maxCoeff();
            return std::max(recon, membership_param(u, xi, tol).residual);
        }
    }, set);
    m.residual = std::max(0.0, m.residual);
    m.inside = m.residual <= tol;
    return m;
}

int param_dim(const UncertaintySet& set) {
    if (const auto* e = std::get_if<EllipsoidParam>(&set)) return e->map.q();
    const int S = set_num_states(set), A = set_num_actions(set);
    return S * A * S;
}

Vec param_initial(const UncertaintySet& set) {
    if (const auto* e = std::get_if<EllipsoidParam>(&set)) return e->center;
    return nominal_kernel(set).flat();
}

TransitionKernel param_kernel(const UncertaintySet& set, const Vec& xi) {
    if (const auto* e = std::get_if<EllipsoidParam>(&set)) return e->map.kernel(xi);
    return TransitionKernel::from_flat(set_num_states(set), set_num_actions(set), xi);
}

Vec param_pullback(const UncertaintySet& set, const RowMat& kernel_grad) {
    if (const auto* e = std::get_if<EllipsoidParam>(&set)) return e->map.pullback(kernel_grad);
    return Eigen::Map<const Vec>(kernel_grad.data(), kernel_grad.size());
}

Vec param_project(const UncertaintySet& set, const Vec& xi, const OracleOptions& opts) {
    if (const auto* e = std::get_if<EllipsoidParam>(&set)) return project_param(*e, xi, opts);
    const int S = set_num_states(set), A = set_num_actions(set);
    return project(set, TransitionKernel::from_flat(S, A, xi), opts).flat();
}

Membership param_membership(const UncertaintySet& set, const Vec& xi, double tol) {
    if (const auto* e = std::get_if<EllipsoidParam>(&set)) return membership_param(*e, xi, tol);
    return membership(set, param_kernel(set, xi), tol);
}

SRectHull s_rect_hull(const UncertaintySet& set) { return {set, is_s_rectangular(set)}; }

LmoResult hull_linear_max_oracle(const SRectHull& hull, const RowMat& grad, double eps, const OracleOptions& opts) {
    if (hull.already_rectangular) return linear_max_oracle(hull.base, grad, eps, opts);
    const int S = set_num_states(hull.base), A = set_num_actions(hull.base);
    require_dims(grad.rows() == S * A && grad.cols() == S, "gradient shape does not match the uncertainty set");
    LmoResult out;
    out.maximizer = TransitionKernel(S, A);
    const double eps_state = eps / S;
    for (int s = 0; s < S; ++s) {
        const LmoResult part = linear_max_oracle(hull.base, zero_except_state(grad, s, A), eps_state, opts);
        out.maximizer.matrix().middleRows(static_cast<Eigen::Index>(s) * A, A) =
            part.maximizer.matrix().middleRows(static_cast<Eigen::Index>(s) * A, A);
        out.certified_gap += part.certified_gap;
    }
    out.value = inner(grad, out.maximizer.matrix());
    return out;
}

}  // namespace rmdp
