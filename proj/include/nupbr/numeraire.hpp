#pragma once

// Pre-numeraire portfolio: the maximizer over C intersected with N-perp of
// the log-growth rate
//   g(rho) = rho'b - rho'c rho / 2 + int [log(1 + rho'x) - rho'x 1{|x|<=1}] nu(dx),
// whose first-order condition is rel(pi|rho) <= 0 for all pi in C.

#include "nupbr/cones.hpp"
#include "nupbr/lattice.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace nupbr {

enum class SolveStatus { Solved, NoSolutionImmediateArbitrage, Unbounded };

inline const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::Solved: return "solved";
    case SolveStatus::NoSolutionImmediateArbitrage: return "immediate_arbitrage";
    case SolveStatus::Unbounded: return "unbounded";
    }
    return "?";
}

struct PreNumeraire {
    Vector rho;
    double growth_value = 0.0;
    double rel_max = 0.0;
    double flipped_rel_max = 0.0;  // same sample, jump integral with a minus sign
    double psi_value = 0.0;
    double gradient_norm = 0.0;    // N-perp projected
    int iterations = 0;
    SolveStatus status = SolveStatus::Solved;
    std::optional<Vector> arbitrage_witness;

    bool solved() const noexcept { return status == SolveStatus::Solved; }
};

struct SolverOptions {
    std::uint64_t seed = 1;
    int verification_samples = 1000;
    int max_iterations = 500;
    double sample_radius = 10.0;          // cap on |pi| along unbounded directions of C
    std::optional<Vector> start;          // feasible starting point, default 0
};

inline double growth(const LocalCharacteristic& lc, const Vector& rho) {
    require_dim(rho.size(), lc.dim(), "growth");
    double g = rho.dot(lc.b) - 0.5 * rho.dot(lc.c * rho);
    for (const auto& a : lc.nu.atoms()) {
        const double e = rho.dot(a.point);
        if (!(1.0 + e > 0.0)) return -std::numeric_limits<double>::infinity();
        g += a.weight * (std::log1p(e) - (a.point.norm() <= 1.0 ? e : 0.0));
    }
    return g;
}

inline Vector growth_gradient(const LocalCharacteristic& lc, const Vector& rho) {
    Vector grad = lc.b - lc.c * rho;
    for (const auto& a : lc.nu.atoms()) {
        const double denom = 1.0 + rho.dot(a.point);
        require(denom != 0.0, ErrorKind::InvalidInput, "1 + rho'x vanishes at an atom");
        grad += a.weight * (1.0 / denom - (a.point.norm() <= 1.0 ? 1.0 : 0.0)) * a.point;
    }
    return grad;
}

inline Matrix growth_hessian(const LocalCharacteristic& lc, const Vector& rho) {
    Matrix h = -lc.c;
    for (const auto& a : lc.nu.atoms()) {
        const double denom = 1.0 + rho.dot(a.point);
        h -= (a.weight / (denom * denom)) * a.point * a.point.transpose();
    }
    return h;
}

/// rel(pi|rho) = (pi - rho)' grad g(rho). With `flipped_jump_sign` the
/// jump integral enters with a minus sign instead.
inline double rel(const LocalCharacteristic& lc, const Vector& pi, const Vector& rho,
                  bool flipped_jump_sign = false) {
    require_dim(pi.size(), lc.dim(), "rel");
    require_dim(rho.size(), lc.dim(), "rel");
    const Vector diff = pi - rho;
    double r = diff.dot(lc.b) - diff.dot(lc.c * rho);
    double jumps = 0.0;
    for (const auto& a : lc.nu.atoms()) {
        const double denom = 1.0 + rho.dot(a.point);
        require(denom != 0.0, ErrorKind::InvalidInput, "rel: 1 + rho'x vanishes at an atom");
        const double e = diff.dot(a.point);
        jumps += a.weight * (e / denom - (a.point.norm() <= 1.0 ? e : 0.0));
    }
    return flipped_jump_sign ? r - jumps : r + jumps;
}

/// psi(rho) = nu[rho'x > 1] + |rho'b + int rho'x (1{|x|>1} - 1{|rho'x|>1}) nu(dx)|
inline double psi(const LocalCharacteristic& lc, const Vector& rho) {
    require_dim(rho.size(), lc.dim(), "psi");
    double big = 0.0, inner = rho.dot(lc.b);
    for (const auto& a : lc.nu.atoms()) {
        const double e = rho.dot(a.point);
        if (e > 1.0) big += a.weight;
        const double ind = (a.point.norm() > 1.0 ? 1.0 : 0.0) - (std::abs(e) > 1.0 ? 1.0 : 0.0);
        inner += a.weight * e * ind;
    }
    return big + std::abs(inner);
}

/// Random point of C: a Gaussian direction scaled uniformly up to the
/// boundary of C (or up to `radius` along directions where C is unbounded).
template <class Rng>
Vector sample_in_C(const LocalCharacteristic& lc, Rng& rng, double radius = 10.0) {
    const int d = lc.dim();
    if (lc.nu.envelope() == SupportEnvelope::UnboundedAllDirections) return Vector::Zero(d);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    Vector u(d);
    for (int i = 0; i < d; ++i) u(i) = normal(rng);
    const double n = u.norm();
    if (n == 0.0) return Vector::Zero(d);
    u /= n;
    double reach = radius;
    for (const auto& a : lc.nu.atoms()) {
        const double e = u.dot(a.point);
        if (e < 0.0) reach = std::min(reach, -1.0 / e);
    }
    Vector pi = unif(rng) * reach * u;
    // Guard against rounding past the boundary.
    for (const auto& a : lc.nu.atoms())
        if (pi.dot(a.point) < -1.0) pi *= 0.999999;
    return pi;
}

namespace detail {

inline bool strictly_feasible(const LocalCharacteristic& lc, const Vector& rho) {
    for (const auto& a : lc.nu.atoms())
        if (!(1.0 + rho.dot(a.point) > 0.0)) return false;
    return true;
}

inline double problem_scale(const LocalCharacteristic& lc) {
    double s = 1.0 + lc.b.norm() + lc.c.norm();
    for (const auto& a : lc.nu.atoms()) s += a.weight * a.point.norm();
    return s;
}

} // namespace detail

/// Damped Newton ascent on g inside N-perp, started at a feasible point
/// (rho = 0 by default) with step halving until every 1 + rho'z > 0.
inline PreNumeraire pre_numeraire(const LocalCharacteristic& lc, const SolverOptions& opt = {}) {
    const int d = lc.dim();
    PreNumeraire out;
    out.rho = Vector::Zero(d);

    const ConeReport cones = analyze_cones(lc);
    if (cones.immediate_arbitrage_witness) {
        out.status = SolveStatus::NoSolutionImmediateArbitrage;
        out.arbitrage_witness = cones.immediate_arbitrage_witness;
        out.growth_value = std::numeric_limits<double>::infinity();
        return out;
    }
    if (lc.nu.envelope() == SupportEnvelope::UnboundedAllDirections) {
        // C = {0}.
        out.psi_value = psi(lc, out.rho);
        return out;
    }

    const Matrix B = orthonormal_complement(as_columns(cones.null_space_basis, d), d);
    const double scale = detail::problem_scale(lc);
    Vector rho = Vector::Zero(d);
    if (opt.start && opt.start->size() == d) {
        const Vector s = B * (B.transpose() * *opt.start);
        if (detail::strictly_feasible(lc, s)) rho = s;
    }

    if (B.cols() > 0) {
        double g = growth(lc, rho);
        bool converged = false;
        for (int it = 0; it < opt.max_iterations; ++it) {
            out.iterations = it + 1;
            const Vector grad = B.transpose() * growth_gradient(lc, rho);
            const double gnorm = grad.norm();
            // Terms of the gradient grow like |rho|, so stationarity is relative to it.
            const double gscale = scale * (1.0 + rho.norm());
            if (gnorm == 0.0) { converged = true; break; }
            const Matrix negH = -(B.transpose() * growth_hessian(lc, rho) * B);
            Eigen::LDLT<Matrix> ldlt(negH);
            Vector step;
            if (ldlt.info() == Eigen::Success && ldlt.isPositive()) step = ldlt.solve(grad);
            if (step.size() == 0 || !step.allFinite() || grad.dot(step) <= 0.0) step = grad;
            const double decrement = grad.dot(step);
            // Near the optimum differences in g drown in rounding, so steps are
            // judged by the gradient norm instead.
            const bool local = decrement < 1e-8 * (1.0 + std::abs(g));

            double t = 1.0;
            bool moved = false;
            for (int h = 0; h < 80; ++h, t *= 0.5) {
                const Vector cand = rho + t * (B * step);
                if (cand == rho) break;  // step below rounding
                if (!detail::strictly_feasible(lc, cand)) continue;
                const double gc = growth(lc, cand);
                const bool accept = local ? (B.transpose() * growth_gradient(lc, cand)).norm() < gnorm
                                          : gc >= g + 1e-4 * t * decrement;
                if (accept) {
                    rho = cand;
                    g = gc;
                    moved = true;
                    break;
                }
            }
            if (rho.norm() > 1e6) {
                out.status = SolveStatus::Unbounded;
                out.rho = rho;
                out.gradient_norm = gnorm;
                out.growth_value = g;
                return out;
            }
            if (!moved) {
                converged = gnorm <= 1e-9 * gscale;
                break;
            }
        }
        const Vector grad = B.transpose() * growth_gradient(lc, rho);
        out.gradient_norm = grad.norm();
        if (!converged && out.gradient_norm > 1e-9 * scale * (1.0 + rho.norm()))
            throw Error(ErrorKind::NotConverged,
                        "pre_numeraire: no convergence after " + std::to_string(out.iterations) +
                            " iterations, gradient norm " + std::to_string(out.gradient_norm));
    }

    out.rho = rho;
    out.growth_value = growth(lc, rho);
    out.psi_value = psi(lc, rho);

    std::mt19937_64 rng(opt.seed);
    out.rel_max = rel(lc, Vector::Zero(d), rho);
    out.flipped_rel_max = rel(lc, Vector::Zero(d), rho, true);
    for (int s = 0; s < opt.verification_samples; ++s) {
        const Vector pi = sample_in_C(lc, rng, opt.sample_radius);
        out.rel_max = std::max(out.rel_max, rel(lc, pi, rho));
        out.flipped_rel_max = std::max(out.flipped_rel_max, rel(lc, pi, rho, true));
    }
    return out;
}

struct IntegrabilityResult {
    std::optional<double> value;               // sum of psi(rho_t) dG_t over [0, T]
    std::optional<std::size_t> failing_slice;  // first slice without a pre-numeraire
};

inline IntegrabilityResult check_integrability(const CharacteristicGrid& grid,
                                               const std::vector<PreNumeraire>& per_slice) {
    require(per_slice.size() >= std::min(grid.slices.size(), grid.horizon_index + 1),
            ErrorKind::DimensionMismatch, "check_integrability: one result per slice required");
    IntegrabilityResult out;
    double sum = 0.0;
    for (std::size_t i = 0; i <= grid.horizon_index && i < grid.slices.size(); ++i) {
        if (!per_slice[i].solved()) {
            out.failing_slice = i;
            return out;
        }
        sum += psi(grid.slices[i], per_slice[i].rho) * grid.slices[i].dG;
    }
    out.value = sum;
    return out;
}

/// H_i = V_- pi_i / (S_i)_-
inline Vector proportions_to_portfolio(const Vector& pi, const Vector& S_minus, double V_minus) {
    require_dim(S_minus.size(), pi.size(), "proportions_to_portfolio");
    require((S_minus.array() > 0.0).all() && V_minus > 0.0, ErrorKind::InvalidInput,
            "prices and wealth must be strictly positive");
    return (V_minus * pi.array() / S_minus.array()).matrix();
}

/// pi_i = (S_i)_- H_i / V_-
inline Vector portfolio_to_proportions(const Vector& H, const Vector& S_minus, double V_minus) {
    require_dim(S_minus.size(), H.size(), "portfolio_to_proportions");
    require((S_minus.array() > 0.0).all() && V_minus > 0.0, ErrorKind::InvalidInput,
            "prices and wealth must be strictly positive");
    return (S_minus.array() * H.array() / V_minus).matrix();
}

struct PortfolioPath {
    std::vector<Vector> H;   // holdings chosen at each node (zero at leaves)
    std::vector<Vector> pi;  // proportions chosen at each node (zero at leaves)
    ProcessOnLattice V;      // wealth, V0 = 1
};

/// Wealth of the proportions `rho` (one per node) with the matching holdings.
inline PortfolioPath numeraire_wealth(const LatticeModel& model, const std::vector<Vector>& rho) {
    PortfolioPath path;
    path.V = wealth_path(model, rho);
    const auto S = price_paths(model);
    path.pi.resize(model.size(), Vector::Zero(model.dim()));
    path.H.resize(model.size(), Vector::Zero(model.dim()));
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model.node(i).is_leaf()) continue;
        path.pi[i] = rho[i];
        path.H[i] = proportions_to_portfolio(rho[i], S[i], path.V[i]);
    }
    return path;
}

struct LatticeNumeraire {
    std::vector<std::optional<PreNumeraire>> per_node;  // empty at leaves
    std::vector<Vector> rho;                            // zero at leaves
    bool all_solved = true;
    std::optional<std::size_t> first_failure;
};

inline LatticeNumeraire solve_lattice_numeraire(const LatticeModel& model,
                                                const SolverOptions& opt = {}) {
    LatticeNumeraire out;
    out.per_node.resize(model.size());
    out.rho.assign(model.size(), Vector::Zero(model.dim()));
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model.node(i).is_leaf()) continue;
        SolverOptions o = opt;
        o.seed = opt.seed + i;
        auto res = pre_numeraire(node_characteristic(model, i), o);
        if (res.solved()) {
            out.rho[i] = res.rho;
        } else if (out.all_solved) {
            out.all_solved = false;
            out.first_failure = i;
        }
        out.per_node[i] = std::move(res);
    }
    return out;
}

} // namespace nupbr
