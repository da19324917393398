#pragma once

#include "rmdp/common.hpp"

#include <functional>

namespace rmdp {

/// Euclidean projection onto the probability simplex (sort-and-threshold). Throws on NaN.
Vec simplex_project(const Eigen::Ref<const Vec>& v);

/// Projection onto {x : ||x||_1 <= radius}.
Vec l1_ball_project(const Eigen::Ref<const Vec>& v, double radius);

/// argmin sum_i w_i/2 (x_i - z_i)^2 over {x >= 0, sum x <= 1}. Weights must be positive.
Vec weighted_solid_simplex_project(const Eigen::Ref<const Vec>& z, const Eigen::Ref<const Vec>& w);

/// argmin sum_i w_i/2 (x_i - z_i)^2 over {x >= 0, sum x = 1}.
Vec weighted_simplex_project(const Eigen::Ref<const Vec>& z, const Eigen::Ref<const Vec>& w);

/// Root of a monotone scalar function on [lo, hi] with f(lo), f(hi) of opposite sign.
double find_root(const std::function<double(double)>& f, double lo, double hi, double x_tol = 0.0,
                 int max_iter = 200);

}  // namespace rmdp
