#pragma once

// Admissible cone C, null set N and immediate-arbitrage set I of a local
// characteristic:
//   C = {p : nu[p'x < -1] = 0}
//   N = {p : p'c = 0, nu[p'x != 0] = 0, p'b = 0}
//   I = {p notin N : p'c = 0, nu[p'x < 0] = 0, p'b - int p'x 1{|x|<=1} nu(dx) >= 0}

#include "nupbr/characteristics.hpp"
#include "nupbr/linalg.hpp"
#include "nupbr/simplex.hpp"

#include <optional>
#include <vector>

namespace nupbr {

inline constexpr double kEqualityTolerance = 1e-10;
inline constexpr double kObjectiveSignTolerance = 1e-12;

/// Diagnostics of the immediate-arbitrage program.
struct ConeMargins {
    double lp_value = 0.0;          // optimum of the normalized exposure program
    double min_exposure = 0.0;      // min over atoms of p'z/|z| at the witness
    double drift_term = 0.0;        // p'b - int p'x 1{|x|<=1} nu(dx)
    double positive_mass = 0.0;     // nu[p'x > 0]
    double max_c_residual = 0.0;    // max_i |(p'c)_i|
};

struct ConeReport {
    std::vector<Vector> null_space_basis;
    std::optional<Vector> immediate_arbitrage_witness;
    ConeMargins margins;
};

inline bool in_C(const LocalCharacteristic& lc, const Vector& p) {
    require_dim(p.size(), lc.dim(), "in_C");
    if (lc.nu.envelope() == SupportEnvelope::UnboundedAllDirections) return (p.array() == 0.0).all();
    for (const auto& a : lc.nu.atoms())
        if (p.dot(a.point) < -1.0) return false;
    return true;
}

namespace detail {

inline Matrix stack_rows(const Matrix& top, const std::vector<Vector>& rows, Eigen::Index dim) {
    Matrix out(top.rows() + static_cast<Eigen::Index>(rows.size()), dim);
    out.topRows(top.rows()) = top;
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(top.rows() + i) = rows[i].transpose();
    return out;
}

/// b - int x 1{|x|<=1} nu(dx)
inline Vector drift_direction(const LocalCharacteristic& lc) {
    return lc.b - barycenter(inside_radius(lc.nu));
}

} // namespace detail

/// Orthonormal basis of N, the kernel of [c; atom points; b'].
inline std::vector<Vector> null_space_N(const LocalCharacteristic& lc) {
    const int d = lc.dim();
    std::vector<Vector> rows;
    for (const auto& a : lc.nu.atoms()) rows.push_back(a.point);
    rows.push_back(lc.b);
    const Matrix K = orthonormal_kernel(detail::stack_rows(lc.c, rows, d), d);
    std::vector<Vector> basis;
    for (Eigen::Index j = 0; j < K.cols(); ++j) basis.push_back(K.col(j));
    return basis;
}

inline Matrix as_columns(const std::vector<Vector>& vs, Eigen::Index dim) {
    Matrix m(dim, static_cast<Eigen::Index>(vs.size()));
    for (std::size_t j = 0; j < vs.size(); ++j) m.col(j) = vs[j];
    return m;
}

/// Evaluates the I-set margins of a direction.
inline ConeMargins direction_margins(const LocalCharacteristic& lc, const Vector& p) {
    ConeMargins m;
    m.drift_term = p.dot(detail::drift_direction(lc));
    m.max_c_residual = lc.dim() ? (lc.c.transpose() * p).cwiseAbs().maxCoeff() : 0.0;
    m.min_exposure = std::numeric_limits<double>::infinity();
    for (const auto& a : lc.nu.atoms()) {
        const double e = p.dot(a.point);
        const double n = a.point.norm();
        if (n > 0.0) m.min_exposure = std::min(m.min_exposure, e / n);
        if (e > kObjectiveSignTolerance * std::max(1.0, n)) m.positive_mass += a.weight;
    }
    if (lc.nu.empty()) m.min_exposure = 0.0;
    return m;
}

/// Full cone analysis. The decision restricts to L = ker(c) intersected
/// with N-perp, where I reduces to the nonzero points of the pointed cone
/// {q : q'z_j >= 0, q'(b - int x 1{|x|<=1} nu) >= 0}; that cone is nonzero
/// iff the sum of its normalized defining functionals has a positive
/// maximum over the unit box.
inline ConeReport analyze_cones(const LocalCharacteristic& lc) {
    const int d = lc.dim();
    ConeReport report;
    report.null_space_basis = null_space_N(lc);
    if (lc.nu.envelope() == SupportEnvelope::UnboundedAllDirections) return report;

    const Matrix L = orthonormal_kernel(
        detail::stack_rows(lc.c, report.null_space_basis, d), d);
    const Eigen::Index k = L.cols();
    if (k == 0) return report;

    std::vector<Vector> functionals;
    for (const auto& a : lc.nu.atoms()) {
        Vector g = L.transpose() * a.point;
        const double n = g.norm();
        if (n > 0.0) functionals.push_back(g / n);
    }
    Vector drift = L.transpose() * detail::drift_direction(lc);
    const double drift_norm = drift.norm();
    if (drift_norm > 0.0) functionals.push_back(drift / drift_norm);

    // q = u - 1 with 0 <= u <= 2.
    lp::Problem prob;
    prob.objective = Vector::Zero(k);
    for (const auto& g : functionals) prob.objective += g;
    for (const auto& g : functionals) prob.add(g, lp::Sense::GreaterEq, g.sum());
    for (Eigen::Index i = 0; i < k; ++i) {
        Vector e = Vector::Zero(k);
        e(i) = 1.0;
        prob.add(e, lp::Sense::LessEq, 2.0);
    }
    const lp::Result res = lp::solve(prob);
    if (res.status != lp::Status::Optimal)
        throw Error(ErrorKind::SolverFailure,
                    std::string("immediate-arbitrage LP: ") + lp::to_string(res.status));

    const Vector q = res.x.array() - 1.0;
    const double value = prob.objective.dot(q);
    report.margins.lp_value = value;
    if (value <= kObjectiveSignTolerance) return report;

    Vector p = L * q;
    p /= p.cwiseAbs().maxCoeff();
    ConeMargins m = direction_margins(lc, p);
    m.lp_value = value;
    report.margins = m;

    bool ok = m.max_c_residual <= kEqualityTolerance && m.drift_term >= -kObjectiveSignTolerance;
    for (const auto& a : lc.nu.atoms())
        if (p.dot(a.point) < -kObjectiveSignTolerance * std::max(1.0, a.point.norm())) ok = false;
    const bool nonnull = m.positive_mass > 0.0 || std::abs(p.dot(lc.b)) > kEqualityTolerance;
    if (!ok || !nonnull)
        throw Error(ErrorKind::SolverFailure,
                    "immediate-arbitrage LP returned a direction that fails the I-conditions");
    report.immediate_arbitrage_witness = std::move(p);
    return report;
}

inline std::optional<Vector> find_immediate_arbitrage(const LocalCharacteristic& lc) {
    return analyze_cones(lc).immediate_arbitrage_witness;
}

} // namespace nupbr
