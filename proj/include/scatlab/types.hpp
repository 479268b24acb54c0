#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace scatlab {

// Points and directions always carry three components; planar scenes keep z = 0.
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad JSON, bad parameters, unknown keys.
class InputError : public Error {
public:
    using Error::Error;
};

class InvalidParameters : public InputError {
public:
    using InputError::InputError;
};

class ValidationFailed : public InputError {
public:
    ValidationFailed(std::string invariant, const std::string& detail)
        : InputError("validation failed (" + invariant + "): " + detail), invariant_(std::move(invariant)) {}
    const std::string& invariant() const noexcept { return invariant_; }

private:
    std::string invariant_;
};

class SpecMismatch : public InputError {
public:
    using InputError::InputError;
};

class IndexOutOfRange : public InputError {
public:
    using InputError::InputError;
};

/// Numerical failures along the flow or its linearization.
class NumericError : public Error {
public:
    using Error::Error;
};

class SingularGradient : public NumericError {
public:
    using NumericError::NumericError;
};

class RootPolishFailed : public NumericError {
public:
    using NumericError::NumericError;
};

class NotScattered : public NumericError {
public:
    using NumericError::NumericError;
};

class TangentIncidence : public NumericError {
public:
    using NumericError::NumericError;
};

class TangentOnPath : public NumericError {
public:
    using NumericError::NumericError;
};

class ItineraryChanged : public NumericError {
public:
    using NumericError::NumericError;
};

namespace detail {

/// Orthonormal basis of the plane orthogonal to `v` inside the first `dim` coordinates.
/// Columns are ordered deterministically so that two callers see the same frame.
inline Eigen::Matrix<double, 3, Eigen::Dynamic> transverse_basis(const Vec3& v, int dim) {
    Eigen::Matrix<double, 3, Eigen::Dynamic> basis(3, dim - 1);
    if (dim == 2) {
        basis.col(0) = Vec3(-v.y(), v.x(), 0.0);
        return basis;
    }
    // Seed with the coordinate axis least aligned with v.
    Vec3 seed = Vec3::UnitX();
    if (std::abs(v.y()) < std::abs(v.x()) && std::abs(v.y()) <= std::abs(v.z()))
        seed = Vec3::UnitY();
    else if (std::abs(v.z()) < std::abs(v.x()) && std::abs(v.z()) < std::abs(v.y()))
        seed = Vec3::UnitZ();
    Vec3 e1 = (seed - seed.dot(v) * v).normalized();
    basis.col(0) = e1;
    basis.col(1) = v.cross(e1);
    return basis;
}

/// Modified Gram-Schmidt of the columns of `basis` against `v` and each other.
inline void reorthonormalize(Eigen::Matrix<double, 3, Eigen::Dynamic>& basis, const Vec3& v) {
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
        Vec3 e = basis.col(k);
        e -= e.dot(v) * v;
        for (Eigen::Index j = 0; j < k; ++j) e -= e.dot(basis.col(j)) * Vec3(basis.col(j));
        basis.col(k) = e.normalized();
    }
}

}  // namespace detail

using Basis = Eigen::Matrix<double, 3, Eigen::Dynamic>;

}  // namespace scatlab
