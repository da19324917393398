#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rmdp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
/// Row-major matrix; used for kernel tensors so that a flat view follows (s, a, s') order.
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SpMat = Eigen::SparseMatrix<double>;

enum class ErrorKind {
    dimension,
    validation,
    convergence,
    numerical,
    unsupported,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so the CLI can map it to an exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Oracle did not reach its tolerance; carries the residual and best incumbent value.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual, double incumbent = 0.0)
        : Error(ErrorKind::convergence, what), residual_(residual), incumbent_(incumbent) {}

    double residual() const noexcept { return residual_; }
    double incumbent() const noexcept { return incumbent_; }

private:
    double residual_;
    double incumbent_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require_dims(bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::dimension, what);
}

/// splitmix64 step; used to derive independent 64-bit seeds from one master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for the `index`-th stream derived from `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace rmdp
