#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace nupbr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorKind {
    DimensionMismatch,
    InvalidInput,
    SolverFailure,
    NotConverged,
    Internal,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::SolverFailure: return "solver failure";
    case ErrorKind::NotConverged: return "not converged";
    case ErrorKind::Internal: return "internal error";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
    if (!condition) throw Error(kind, what);
}

inline void require_dim(Eigen::Index got, Eigen::Index expected, const char* where) {
    if (got != expected)
        throw Error(ErrorKind::DimensionMismatch,
                    std::string(where) + ": expected dimension " + std::to_string(expected) +
                        ", got " + std::to_string(got));
}

/// Kahan-compensated sum of a range of doubles.
template <class Range>
double compensated_sum(const Range& values) {
    double sum = 0.0, carry = 0.0;
    for (double v : values) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    return sum;
}

} // namespace nupbr
