#pragma once

// Uncertainty sets over transition kernels and their oracles: Euclidean projection,
// linear maximization (direction finding) and membership, plus rectangularity diagnostics.

#include "rmdp/affine_map.hpp"

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace rmdp {

/// Block of parameter coordinates: a box [lo, hi] or a solid simplex {x >= 0, sum x <= 1}.
struct ParamBlock {
    enum class Kind { box, solid_simplex };
    Kind kind = Kind::box;
    std::vector<int> index;
    double lo = 0.0;
    double hi = 1.0;
};

/// Product region Xi0 of disjoint blocks; coordinates not covered by any block are free.
struct ParamRegion {
    int dim = 0;
    std::vector<ParamBlock> blocks;

    static ParamRegion unbounded(int dim);
    static ParamRegion box(int dim, double lo, double hi);
    /// One solid simplex per group of coordinates.
    static ParamRegion solid_simplices(int dim, const std::vector<std::vector<int>>& groups);

    Vec project(const Vec& x) const;
    /// argmin sum_i w_i/2 (x_i - z_i)^2 over the region.
    Vec project_weighted(const Vec& z, const Vec& w) const;
    double violation(const Vec& x) const;
};

/// Symmetric positive-definite matrix, stored diagonally when possible.
class QuadraticForm {
public:
    QuadraticForm() = default;
    static QuadraticForm diagonal(Vec diag);
    static QuadraticForm dense(Mat m);

    int dim() const { return static_cast<int>(is_diag_ ? diag_.size() : dense_.rows()); }
    bool is_diagonal() const { return is_diag_; }
    const Vec& diag() const { return diag_; }
    Mat to_dense() const;
    double eval(const Vec& x) const;  // x^T H x
    Vec apply(const Vec& x) const;
    double lambda_min() const { return lmin_; }
    double lambda_max() const { return lmax_; }

private:
    bool is_diag_ = true;
    Vec diag_;
    Mat dense_;
    double lmin_ = 0.0;
    double lmax_ = 0.0;
};

/// {P : ||P(.|s,a) - P_ref(.|s,a)||_2 <= r for all s, a}.
struct SaRectL2 {
    TransitionKernel p_ref;
    double radius = 0.0;
};

/// {P : ||P(.|s,.) - P_ref(.|s,.)||_1 <= r for all s}.
struct SRectL1 {
    TransitionKernel p_ref;
    double radius = 0.0;
};

/// {P^xi : (xi - center)^T H (xi - center) <= r, xi in region}.
struct EllipsoidParam {
    AffineKernelMap map;
    Vec center;
    QuadraticForm h;
    double radius = 0.0;
    ParamRegion region;
};

struct Singleton {
    TransitionKernel p;
};

using UncertaintySet = std::variant<SaRectL2, SRectL1, EllipsoidParam, Singleton>;

const char* kind_name(const UncertaintySet& set);
bool is_s_rectangular(const UncertaintySet& set);
/// Checks the invariants of the set itself (radius, kernel rows, H, center in region).
void validate(const UncertaintySet& set);
int set_num_states(const UncertaintySet& set);
int set_num_actions(const UncertaintySet& set);
/// A kernel known to lie in the set (the reference / center kernel).
TransitionKernel nominal_kernel(const UncertaintySet& set);

struct OracleOptions {
    double tol = 1e-9;
    int max_sweeps = 10000;
};

/// Euclidean projection in kernel space. Not available for EllipsoidParam (parameter space only).
TransitionKernel project(const UncertaintySet& set, const TransitionKernel& point, const OracleOptions& opts = {});
/// Euclidean projection in parameter space for an ellipsoidal set.
Vec project_param(const EllipsoidParam& set, const Vec& xi, const OracleOptions& opts = {});

struct LmoResult {
    TransitionKernel maximizer;
    double value = 0.0;        // <grad, maximizer>
    std::optional<Vec> xi;     // parameter of the maximizer for parameterized sets
    double certified_gap = 0.0;  // upper bound on max - value reported by the inner solver
};

/// Returns P_eps in the set with <grad, P_eps> >= max_{P in set} <grad, P> - eps.
LmoResult linear_max_oracle(const UncertaintySet& set, const RowMat& grad, double eps,
                            const OracleOptions& opts = {});

struct Membership {
    bool inside = false;
    double residual = 0.0;  // largest constraint violation
};
Membership membership(const UncertaintySet& set, const TransitionKernel& point, double tol);
Membership membership_param(const EllipsoidParam& set, const Vec& xi, double tol);

/// Parameter-space view used by Langevin dynamics. Kernel-space sets use the identity
/// embedding xi = vec(P); ellipsoidal sets use their own parameter.
int param_dim(const UncertaintySet& set);
Vec param_initial(const UncertaintySet& set);
TransitionKernel param_kernel(const UncertaintySet& set, const Vec& xi);
Vec param_pullback(const UncertaintySet& set, const RowMat& kernel_grad);
Vec param_project(const UncertaintySet& set, const Vec& xi, const OracleOptions& opts = {});
Membership param_membership(const UncertaintySet& set, const Vec& xi, double tol);

/// Smallest s-rectangular set containing `set`, accessed through per-state oracles.
struct SRectHull {
    UncertaintySet base;
    bool already_rectangular = true;
};

SRectHull s_rect_hull(const UncertaintySet& set);
/// Linear maximization over the hull; the maximizer combines per-state blocks.
LmoResult hull_linear_max_oracle(const SRectHull& hull, const RowMat& grad, double eps,
                                 const OracleOptions& opts = {});

}  // namespace rmdp
