#pragma once

#include "rmdp/mdp.hpp"

namespace rmdp {

/// Affine map xi -> P^xi = base + J xi, with J acting on the flat (s, a, s') kernel.
struct AffineKernelMap {
    int num_states = 0;
    int num_actions = 0;
    RowMat base;   // (S*A) x S
    SpMat jacobian;  // (S*A*S) x q

    int q() const { return static_cast<int>(jacobian.cols()); }
    TransitionKernel kernel(const Vec& xi) const;
    /// J^T vec(grad): chain rule from kernel space to parameter space.
    Vec pullback(const RowMat& kernel_grad) const;
    /// Least-squares coordinates of a kernel (exact when the kernel lies in the image).
    Vec coordinates(const TransitionKernel& kernel) const;

    /// P^xi = xi, q = S*A*S.
    static AffineKernelMap identity(int num_states, int num_actions);
    /// xi holds P(s'|s,a) for s' < S-1; the last next-state takes the remaining mass.
    static AffineKernelMap drop_last(int num_states, int num_actions);
};

}  // namespace rmdp
