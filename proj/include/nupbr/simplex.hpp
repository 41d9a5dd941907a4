#pragma once

// Dense two-phase primal simplex for the small LPs of the cone and
// rebalancing computations. Variables are nonnegative; Bland's rule
// throughout, so no cycling. The final basis is re-solved with a full-pivot
// LU to recover vertex coordinates to working precision.

#include "nupbr/core.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <vector>

namespace nupbr::lp {

enum class Sense { LessEq, GreaterEq, Equal };

struct Constraint {
    Vector coeffs;
    Sense sense = Sense::LessEq;
    double rhs = 0.0;
};

struct Problem {
    Vector objective;  // one entry per (nonnegative) variable
    std::vector<Constraint> constraints;
    bool maximize = true;

    int num_vars() const { return static_cast<int>(objective.size()); }

    void add(Vector coeffs, Sense sense, double rhs) {
        require_dim(coeffs.size(), objective.size(), "lp constraint");
        constraints.push_back({std::move(coeffs), sense, rhs});
    }
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(Status s) {
    switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration limit";
    }
    return "?";
}

struct Result {
    Status status = Status::Infeasible;
    Vector x;
    double objective = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

class Tableau {
public:
    Tableau(const Problem& p) : n_(p.num_vars()) {
        const int m = static_cast<int>(p.constraints.size());
        int slacks = 0, artificials = 0;
        for (const auto& c : p.constraints) {
            if (c.sense != Sense::Equal) ++slacks;
            if (c.sense != Sense::LessEq || c.rhs < 0.0) ++artificials;
        }
        cols_ = n_ + slacks + artificials;
        t_ = Matrix::Zero(m, cols_ + 1);
        basis_.assign(m, -1);
        artificial_.assign(cols_, false);

        int next_slack = n_, next_art = n_ + slacks;
        for (int i = 0; i < m; ++i) {
            const auto& c = p.constraints[i];
            double scale = c.coeffs.size() ? c.coeffs.cwiseAbs().maxCoeff() : 0.0;
            if (scale == 0.0) scale = 1.0;
            double sign = c.rhs < 0.0 ? -1.0 : 1.0;
            t_.row(i).head(n_) = sign * c.coeffs.transpose() / scale;
            t_(i, cols_) = sign * c.rhs / scale;
            Sense sense = c.sense;
            if (sign < 0.0 && sense != Sense::Equal)
                sense = sense == Sense::LessEq ? Sense::GreaterEq : Sense::LessEq;
            if (c.sense != Sense::Equal) {
                t_(i, next_slack) = sense == Sense::LessEq ? 1.0 : -1.0;
                if (sense == Sense::LessEq) basis_[i] = next_slack;
                ++next_slack;
            }
            if (basis_[i] < 0) {
                t_(i, next_art) = 1.0;
                artificial_[next_art] = true;
                basis_[i] = next_art;
                ++next_art;
            }
        }
        cols_ = next_art;  // artificials actually used
        t_.conservativeResize(Eigen::NoChange, cols_ + 1);
        t_.col(cols_) = rhs_column(p, m);
        artificial_.resize(cols_);
        scaled_rows_ = t_;
    }

    Status phase_one() {
        Vector cost = Vector::Zero(cols_);
        bool any = false;
        for (int j = 0; j < cols_; ++j)
            if (artificial_[j]) { cost(j) = -1.0; any = true; }
        if (!any) return Status::Optimal;
        Status s = iterate(cost, false);
        if (s != Status::Optimal) return s;
        double infeas = 0.0;
        for (std::size_t i = 0; i < basis_.size(); ++i)
            if (artificial_[basis_[i]]) infeas += t_(i, cols_);
        const double rhs_scale = 1.0 + scaled_rows_.col(cols_).cwiseAbs().maxCoeff();
        if (infeas > 1e-9 * rhs_scale) return Status::Infeasible;
        drive_out_artificials();
        return Status::Optimal;
    }

    Status phase_two(const Vector& objective) {
        Vector cost = Vector::Zero(cols_);
        cost.head(n_) = objective;
        return iterate(cost, true);
    }

    Vector solution() const {
        Vector x = Vector::Zero(n_);
        const int m = static_cast<int>(basis_.size());
        if (m > 0) {
            // Re-solve B x_B = r on the scaled original rows.
            Matrix B(m, m);
            for (int k = 0; k < m; ++k) B.col(k) = scaled_rows_.col(basis_[k]).head(m);
            Vector r = scaled_rows_.col(cols_).head(m);
            Eigen::FullPivLU<Matrix> lu(B);
            Vector xb;
            bool polished = false;
            if (lu.isInvertible()) {
                xb = lu.solve(r);
                polished = xb.allFinite() && (xb.array() > -1e-9).all() &&
                           (B * xb - r).cwiseAbs().maxCoeff() < 1e-9;
            }
            for (int k = 0; k < m; ++k) {
                const int j = basis_[k];
                if (j < n_) x(j) = std::max(0.0, polished ? xb(k) : t_(k, cols_));
            }
        }
        return x;
    }

private:
    static Vector rhs_column(const Problem& p, int m) {
        Vector r(m);
        for (int i = 0; i < m; ++i) {
            const auto& c = p.constraints[i];
            double scale = c.coeffs.size() ? c.coeffs.cwiseAbs().maxCoeff() : 0.0;
            if (scale == 0.0) scale = 1.0;
            r(i) = std::abs(c.rhs) / scale;
        }
        return r;
    }

    Status iterate(const Vector& cost, bool forbid_artificial) {
        const int m = static_cast<int>(basis_.size());
        const int limit = 200 * (m + cols_) + 1000;
        for (int it = 0; it < limit; ++it) {
            int enter = -1;
            for (int j = 0; j < cols_; ++j) {
                if (forbid_artificial && artificial_[j]) continue;
                double d = cost(j);
                for (int i = 0; i < m; ++i) d -= cost(basis_[i]) * t_(i, j);
                if (d > kReducedCostTol) { enter = j; break; }
            }
            if (enter < 0) return Status::Optimal;
            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                const double a = t_(i, enter);
                if (a <= kPivotTol) continue;
                const double ratio = t_(i, cols_) / a;
                if (ratio < best - 1e-15 ||
                    (std::abs(ratio - best) <= 1e-15 && leave >= 0 && basis_[i] < basis_[leave])) {
                    best = ratio;
                    leave = i;
                }
            }
            if (leave < 0) return Status::Unbounded;
            pivot(leave, enter);
        }
        return Status::IterationLimit;
    }

    void pivot(int r, int c) {
        t_.row(r) /= t_(r, c);
        for (int i = 0; i < t_.rows(); ++i) {
            if (i == r) continue;
            const double f = t_(i, c);
            if (f != 0.0) t_.row(i) -= f * t_.row(r);
        }
        basis_[r] = c;
    }

    void drive_out_artificials() {
        for (int i = 0; i < static_cast<int>(basis_.size());) {
            if (!artificial_[basis_[i]]) { ++i; continue; }
            int col = -1;
            double best = kPivotTol;
            for (int j = 0; j < cols_; ++j) {
                if (artificial_[j]) continue;
                if (std::abs(t_(i, j)) > best) { best = std::abs(t_(i, j)); col = j; }
            }
            if (col >= 0) {
                pivot(i, col);
                ++i;
            } else {
                // Redundant row.
                remove_row(i);
            }
        }
    }

    void remove_row(int r) {
        auto drop = [r](Matrix& m) {
            const Eigen::Index rows = m.rows();
            if (r < rows - 1) m.middleRows(r, rows - r - 1) = m.bottomRows(rows - r - 1).eval();
            m.conservativeResize(rows - 1, Eigen::NoChange);
        };
        drop(t_);
        drop(scaled_rows_);
        basis_.erase(basis_.begin() + r);
    }

    static constexpr double kPivotTol = 1e-11;
    static constexpr double kReducedCostTol = 1e-11;

    int n_;
    int cols_ = 0;
    Matrix t_;
    Matrix scaled_rows_;
    std::vector<int> basis_;
    std::vector<bool> artificial_;
};

} // namespace detail

inline Result solve(const Problem& problem) {
    Result out;
    for (const auto& c : problem.constraints)
        require_dim(c.coeffs.size(), problem.num_vars(), "lp::solve");
    detail::Tableau tab(problem);
    Status s = tab.phase_one();
    if (s != Status::Optimal) {
        out.status = s == Status::Infeasible ? Status::Infeasible : s;
        return out;
    }
    const Vector obj = problem.maximize ? problem.objective : Vector(-problem.objective);
    s = tab.phase_two(obj);
    out.status = s;
    if (s == Status::Optimal) {
        out.x = tab.solution();
        out.objective = problem.objective.dot(out.x);
    }
    return out;
}

} // namespace nupbr::lp
