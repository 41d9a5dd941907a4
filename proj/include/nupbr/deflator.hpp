#pragma once

// Local martingale deflator by measure rebalancing.
//
// After the numeraire change S' = (1, S) / V*, the tail of the new jump
// compensator nu' is shifted to F = (1{|x|>1} nu') * delta_{beta b'} with
// beta = 1 / nu'(|x| > 1). F is reweighted to an equivalent F_check of equal
// mass, zero barycenter and total variation distance <= 1; the density
// p = dF_check/dF, read back on the tail as U(x) = p(x + beta b'), drives the
// exponential density E(M) with jumps W = U - 1{|x|>1}. The deflator is
// xi = E(M) / V*.

#include "nupbr/numeraire.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nupbr {

inline constexpr double kDeflatorTolerance = 1e-10;

struct DAndF {
    double tail_mass = 0.0;
    double beta = 0.0;
    Vector shift;  // beta * b'
    DiscreteMeasure F;
};

/// Empty when nu' has no mass beyond radius 1 (the slice is off D).
inline std::optional<DAndF> compute_D_and_F(const LocalCharacteristic& lcp) {
    auto tail = tail_beyond_radius(lcp.nu);
    if (tail.mass == 0.0) return std::nullopt;
    DAndF out;
    out.tail_mass = tail.mass;
    out.beta = 1.0 / tail.mass;
    out.shift = out.beta * lcp.b;
    out.F = convolve_dirac(tail.restricted, out.shift);
    return out;
}

/// |b'|, which equals |x'^v| off D and must vanish there after a genuine
/// numeraire change.
inline double off_D_drift_check(const LocalCharacteristic& lcp) {
    return lcp.b.norm();
}

struct HypothesisVerdict {
    bool holds = true;
    std::optional<Vector> witness;  // admissible pi with pi'bar(F) > tol
    double max_value = 0.0;         // max of pi'bar(F) over admissible pi in the unit box
};

/// Checks int pi'z F(dz) <= tol for every pi with F(pi'z < -1) = 0, by
/// maximizing pi'bar(F) over {pi : pi'z_j >= -1} intersected with the unit
/// box. A declared unbounded envelope shrinks the admissible set to {0}.
inline HypothesisVerdict check_crucial_hypothesis(const DiscreteMeasure& F,
                                                  double tol = kDeflatorTolerance) {
    HypothesisVerdict out;
    if (F.envelope() == SupportEnvelope::UnboundedAllDirections) return out;
    const int d = F.dim();
    const Vector bar = barycenter(F);
    if ((bar.array() == 0.0).all()) return out;

    // pi = u - 1, 0 <= u <= 2
    lp::Problem prob;
    prob.objective = bar;
    for (const auto& a : F.atoms()) prob.add(a.point, lp::Sense::GreaterEq, -1.0 + a.point.sum());
    for (int i = 0; i < d; ++i) {
        Vector e = Vector::Zero(d);
        e(i) = 1.0;
        prob.add(e, lp::Sense::LessEq, 2.0);
    }
    const auto res = lp::solve(prob);
    if (res.status != lp::Status::Optimal)
        throw Error(ErrorKind::SolverFailure,
                    std::string("crucial-hypothesis LP: ") + lp::to_string(res.status));
    const Vector pi = res.x.array() - 1.0;
    out.max_value = bar.dot(pi);
    if (out.max_value > tol) {
        out.holds = false;
        out.witness = pi;
    }
    return out;
}

struct RebalancedMeasure {
    DiscreteMeasure F;
    DiscreteMeasure F_check;
    std::vector<double> density_p;  // dF_check/dF, in F's atom order
    double tv = 0.0;
    double floor = 0.0;             // strict-positivity floor used: w_check >= floor * w

    double density_at(const Vector& z) const {
        for (std::size_t i = 0; i < F.size(); ++i)
            if (same_point(F.atoms()[i].point, z)) return density_p[i];
        throw Error(ErrorKind::Internal, "rebalanced density queried off the support of F");
    }
};

enum class RebalanceStatus { Ok, Infeasible, BudgetExceeded };

inline const char* to_string(RebalanceStatus s) {
    switch (s) {
    case RebalanceStatus::Ok: return "ok";
    case RebalanceStatus::Infeasible: return "infeasible";
    case RebalanceStatus::BudgetExceeded: return "budget_exceeded";
    }
    return "?";
}

struct RebalanceOutcome {
    RebalanceStatus status = RebalanceStatus::Infeasible;
    std::optional<RebalancedMeasure> result;
    double optimum = std::numeric_limits<double>::quiet_NaN();  // minimal TV found

    bool ok() const noexcept { return status == RebalanceStatus::Ok; }
};

namespace detail {

// Variables: [w_check (n), t (n)], t_i >= |w_check_i - w_i|.
inline lp::Problem rebalance_program(const DiscreteMeasure& F, double floor) {
    const int n = static_cast<int>(F.size());
    const int d = F.dim();
    lp::Problem prob;
    prob.maximize = false;
    prob.objective = Vector::Zero(2 * n);
    prob.objective.tail(n).setOnes();

    Vector mass_row = Vector::Zero(2 * n);
    mass_row.head(n).setOnes();
    prob.add(mass_row, lp::Sense::Equal, F.mass());
    for (int k = 0; k < d; ++k) {
        Vector row = Vector::Zero(2 * n);
        for (int i = 0; i < n; ++i) row(i) = F.atoms()[i].point(k);
        prob.add(row, lp::Sense::Equal, 0.0);
    }
    for (int i = 0; i < n; ++i) {
        const double w = F.atoms()[i].weight;
        Vector lo = Vector::Zero(2 * n);
        lo(i) = 1.0;
        prob.add(lo, lp::Sense::GreaterEq, floor * w);
        Vector up = Vector::Zero(2 * n);
        up(n + i) = 1.0;
        up(i) = -1.0;
        prob.add(up, lp::Sense::GreaterEq, -w);
        Vector down = Vector::Zero(2 * n);
        down(n + i) = 1.0;
        down(i) = 1.0;
        prob.add(down, lp::Sense::GreaterEq, w);
    }
    return prob;
}

} // namespace detail

/// Minimal-TV zero-barycenter reweighting of F:
///   minimize sum |w_check_i - w_i|  s.t.  sum w_check = sum w,
///   sum w_check_i z_i = 0,  w_check_i >= floor * w_i,
/// with floor = 1e-6 halved on infeasibility down to 1e-12. Ties among
/// optima go to the lexicographically smallest w_check. Accepted iff the
/// optimum is <= budget. `offset` is the norm of the shift that produced F;
/// it sets the rounding scale below which F already counts as centred.
inline RebalanceOutcome rebalance(const DiscreteMeasure& F, double budget = 1.0, double offset = 0.0) {
    RebalanceOutcome out;
    require(!F.empty(), ErrorKind::InvalidInput, "rebalance: empty measure");
    const int n = static_cast<int>(F.size());
    const double mass = F.mass();

    double moment_scale = 0.0;
    for (const auto& a : F.atoms()) moment_scale += a.weight * a.point.norm();
    // F comes from shifting atoms with |x| > 1 by `offset`, so its rounding is
    // absolute per unit mass even when the shifted points collapse toward 0.
    if (barycenter(F).norm() <= 1e-13 * (moment_scale + mass * (1.0 + offset))) {
        // Already centred to working precision.
        RebalancedMeasure r{F, F, std::vector<double>(n, 1.0), 0.0, 1.0};
        out.status = RebalanceStatus::Ok;
        out.optimum = 0.0;
        out.result = std::move(r);
        return out;
    }

    double floor = 1e-6;
    lp::Problem prob;
    lp::Result res;
    for (;;) {
        prob = detail::rebalance_program(F, floor);
        res = lp::solve(prob);
        if (res.status == lp::Status::Optimal) break;
        if (res.status != lp::Status::Infeasible)
            throw Error(ErrorKind::SolverFailure,
                        std::string("rebalance LP: ") + lp::to_string(res.status));
        floor *= 0.5;
        if (floor < 1e-12) return out;  // Infeasible
    }
    out.optimum = res.objective;

    // Lexicographic tie-break over the optimal face.
    Vector tv_row = Vector::Zero(2 * n);
    tv_row.tail(n).setOnes();
    prob.add(tv_row, lp::Sense::LessEq, res.objective + 1e-15 * (1.0 + mass));
    Vector x = res.x;
    for (int i = 0; i < n; ++i) {
        lp::Problem lex = prob;
        lex.objective = Vector::Zero(2 * n);
        lex.objective(i) = 1.0;
        const auto r = lp::solve(lex);
        if (r.status != lp::Status::Optimal) break;
        x = r.x;
        Vector fix = Vector::Zero(2 * n);
        fix(i) = 1.0;
        prob.add(fix, lp::Sense::LessEq, r.x(i) + 1e-15 * (1.0 + mass));
    }

    std::vector<double> w(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += (w[i] = x(i));
    for (auto& v : w) v *= mass / total;

    RebalancedMeasure r{F, F.reweighted(w), {}, 0.0, floor};
    r.density_p.resize(n);
    for (int i = 0; i < n; ++i) r.density_p[i] = w[i] / F.atoms()[i].weight;
    r.tv = tv_distance(F, r.F_check);
    out.status = r.tv <= budget + 1e-12 ? RebalanceStatus::Ok : RebalanceStatus::BudgetExceeded;
    out.result = std::move(r);
    return out;
}

/// U(x) on the tail atoms of nu'; 0 everywhere else.
struct UTable {
    std::vector<Atom> entries;  // (x, U(x))

    double operator()(const Vector& x) const {
        for (const auto& e : entries)
            if (same_point(e.point, x)) return e.weight;
        return 0.0;
    }
    bool empty() const noexcept { return entries.empty(); }
};

inline UTable density_U(const LocalCharacteristic& lcp, double beta, const RebalancedMeasure& reb) {
    UTable table;
    const Vector shift = beta * lcp.b;
    const Tail tail = tail_beyond_radius(lcp.nu);
    for (const auto& a : tail.restricted.atoms()) {
        const Vector key = a.point + shift;
        double p = 0.0;
        try {
            p = reb.density_at(key);
        } catch (const Error&) {
            throw Error(ErrorKind::Internal, "density_U: tail atom has no rebalanced density");
        }
        table.entries.push_back({a.point, p});
    }
    return table;
}

struct NewCharacteristic {
    LocalCharacteristic lc;
    double residual = 0.0;  // |b'' + int x 1{|x|>1} nu''(dx)|
};

/// nu'' = (U - 1{|x|>1} + 1) nu' on a slice in D, nu' elsewhere; b'' = b', c'' = c'.
inline NewCharacteristic new_characteristic(const LocalCharacteristic& lcp, const UTable& U) {
    NewCharacteristic out{lcp, 0.0};
    if (!U.empty()) {
        std::vector<Atom> atoms;
        for (const auto& a : lcp.nu.atoms()) {
            const double w = a.point.norm() > 1.0 ? a.weight * U(a.point) : a.weight;
            if (w > 0.0) atoms.push_back({a.point, w});
        }
        out.lc.nu = DiscreteMeasure(lcp.dim(), std::move(atoms), lcp.nu.envelope());
    }
    out.residual = drift_rate(out.lc).norm();
    return out;
}

/// Per-slice (grid) or per-node (lattice) record of the construction.
struct SliceDeflation {
    bool within_horizon = true;
    bool in_D = false;
    LocalCharacteristic lc_prime;
    std::optional<DAndF> d_and_f;
    HypothesisVerdict hypothesis;
    std::optional<RebalanceOutcome> rebalance;
    UTable U;
    LocalCharacteristic lc_new;
    double residual = 0.0;        // drift rate of X' under the new measure
    double off_D_drift = 0.0;     // |b'| when off D
    double tv_budget_used = 0.0;  // int |U - 1{|x|>1}| dnu'
};

inline SliceDeflation deflate_slice(const LocalCharacteristic& lcp, bool within_horizon,
                                    std::vector<std::string>& findings, const std::string& where,
                                    double tol = kDeflatorTolerance) {
    SliceDeflation s;
    s.within_horizon = within_horizon;
    s.lc_prime = lcp;
    s.lc_new = lcp;
    s.d_and_f = compute_D_and_F(lcp);
    s.in_D = s.d_and_f.has_value();
    if (!within_horizon) {
        s.residual = drift_rate(lcp).norm();
        return s;
    }
    if (!s.in_D) {
        s.off_D_drift = off_D_drift_check(lcp);
        s.residual = s.off_D_drift;
        if (s.off_D_drift > tol)
            findings.push_back(where + ": off-D drift |b'| = " + std::to_string(s.off_D_drift));
        return s;
    }
    s.hypothesis = check_crucial_hypothesis(s.d_and_f->F, tol);
    if (!s.hypothesis.holds) {
        findings.push_back(where + ": rebalancing hypothesis violated, max pi'bar(F) = " +
                           std::to_string(s.hypothesis.max_value));
        s.residual = drift_rate(lcp).norm();
        return s;
    }
    s.rebalance = rebalance(s.d_and_f->F, 1.0, s.d_and_f->shift.norm());
    if (!s.rebalance->ok()) {
        findings.push_back(where + ": rebalancing " + to_string(s.rebalance->status));
        s.residual = drift_rate(lcp).norm();
        return s;
    }
    s.U = density_U(lcp, s.d_and_f->beta, *s.rebalance->result);
    auto nc = new_characteristic(lcp, s.U);
    s.lc_new = std::move(nc.lc);
    s.residual = nc.residual;
    const Tail tail = tail_beyond_radius(lcp.nu);
    for (const auto& a : tail.restricted.atoms())
        s.tv_budget_used += a.weight * std::abs(s.U(a.point) - 1.0);
    if (s.residual > tol)
        findings.push_back(where + ": residual drift " + std::to_string(s.residual));
    if (s.tv_budget_used > 1.0 + 1e-12)
        findings.push_back(where + ": TV budget " + std::to_string(s.tv_budget_used) + " > 1");
    return s;
}

struct DeflatorBundle {
    std::vector<std::optional<SliceDeflation>> slices;  // per grid slice, or per lattice node (empty at leaves)
    double lepingle_sum = 0.0;      // max over paths of sum dG int |W| dnu'
    double reference_total = 0.0;   // G_T (max over paths on lattices)
    double lepingle_slack = 0.0;    // min over paths of G_T - accumulated; >= 0 required
    double max_compensator = 0.0;   // max |int W dnu' dG| over nodes
    std::vector<std::string> findings;

    // Lattice runs only.
    std::vector<Vector> rho;
    ProcessOnLattice V_star;
    std::optional<LatticeModel> changed;
    ProcessOnLattice EM;
    ProcessOnLattice xi;

    bool clean() const noexcept { return findings.empty(); }
};

/// Pointwise pipeline on a grid of post-change characteristics lc'.
inline DeflatorBundle deflate_grid(const CharacteristicGrid& grid, double tol = kDeflatorTolerance) {
    require_valid_grid(grid);
    DeflatorBundle out;
    out.slices.resize(grid.slices.size());
    for (std::size_t i = 0; i < grid.slices.size(); ++i) {
        const bool inside = i <= grid.horizon_index;
        out.slices[i] = deflate_slice(grid.slices[i], inside, out.findings,
                                      "slice " + std::to_string(i), tol);
        if (inside) {
            out.lepingle_sum += grid.slices[i].dG * out.slices[i]->tv_budget_used;
            out.reference_total += grid.slices[i].dG;
        }
    }
    out.lepingle_slack = out.reference_total - out.lepingle_sum;
    if (out.lepingle_slack < -1e-12) out.findings.push_back("Lepingle budget exceeded");
    return out;
}

/// Branch returns of S' = (1/V*, S/V*): dX'_0 = V/V_child - 1,
/// dX'_i = (1 + dX_i) V/V_child - 1.
inline LatticeModel numeraire_change(const LatticeModel& model, const ProcessOnLattice& V_star) {
    require(V_star.size() == model.size(), ErrorKind::DimensionMismatch,
            "numeraire_change: one wealth value per node required");
    for (std::size_t i = 0; i < V_star.size(); ++i)
        require(V_star[i] > 0.0, ErrorKind::InvalidInput,
                "numeraire_change: nonpositive V* at node " + std::to_string(i));
    const int d = model.dim();
    Vector S0p(d + 1);
    S0p(0) = 1.0 / V_star[0];
    S0p.tail(d) = model.S0() / V_star[0];
    LatticeModel out(d + 1, S0p);
    for (std::size_t i = 0; i < model.size(); ++i) {
        const auto& n = model.node(i);
        out.set_dG(i, n.dG);
        for (const auto& br : n.branches) {
            const double ratio = V_star[i] / V_star[br.child];
            Vector jp(d + 1);
            jp(0) = ratio - 1.0;
            jp.tail(d) = (br.jump.array() * ratio + (ratio - 1.0)).matrix();
            const std::size_t id = out.add_branch(i, br.prob, std::move(jp));
            require(id == br.child, ErrorKind::Internal, "numeraire_change: node order");
        }
    }
    return out;
}

struct ExponentialDensity {
    ProcessOnLattice EM;
    double lepingle_sum = 0.0;
    double reference_total = 0.0;
    double lepingle_slack = std::numeric_limits<double>::infinity();
    double max_compensator = 0.0;
    double min_factor = std::numeric_limits<double>::infinity();
};

/// E(M) for M = (U - 1_D 1{|x|>1}) * (mu - mu^p) on a changed lattice. A node
/// is in D iff its U table is nonempty.
inline ExponentialDensity exponential_density(const LatticeModel& changed,
                                              const std::vector<UTable>& U) {
    require(U.size() == changed.size(), ErrorKind::DimensionMismatch,
            "exponential_density: one U table per node required");
    ExponentialDensity out;
    out.EM.assign(changed.size(), 0.0);
    out.EM[0] = 1.0;
    ProcessOnLattice acc(changed.size(), 0.0), G(changed.size(), 0.0);
    for (std::size_t i = 0; i < changed.size(); ++i) {
        const auto& n = changed.node(i);
        if (n.is_leaf()) continue;
        const bool in_D = !U[i].empty();
        std::vector<double> W(n.branches.size(), 0.0);
        double comp = 0.0, abs_int = 0.0;
        for (std::size_t k = 0; k < n.branches.size(); ++k) {
            const auto& x = n.branches[k].jump;
            if (in_D) W[k] = U[i](x) - (x.norm() > 1.0 ? 1.0 : 0.0);
            comp += n.branches[k].prob * W[k];
            abs_int += n.branches[k].prob * std::abs(W[k]);
        }
        out.max_compensator = std::max(out.max_compensator, std::abs(comp));
        for (std::size_t k = 0; k < n.branches.size(); ++k) {
            const auto& br = n.branches[k];
            const double factor = 1.0 + (W[k] - comp);
            if (!(factor > 0.0))
                throw Error(ErrorKind::Internal, "exponential_density: nonpositive factor at node " +
                                                     std::to_string(i));
            out.min_factor = std::min(out.min_factor, factor);
            out.EM[br.child] = out.EM[i] * factor;
            acc[br.child] = acc[i] + abs_int;
            G[br.child] = G[i] + n.dG;
        }
    }
    for (std::size_t leaf : changed.leaves()) {
        out.lepingle_sum = std::max(out.lepingle_sum, acc[leaf]);
        out.reference_total = std::max(out.reference_total, G[leaf]);
        out.lepingle_slack = std::min(out.lepingle_slack, G[leaf] - acc[leaf]);
    }
    if (changed.size() == 1) out.lepingle_slack = 0.0;
    return out;
}

inline ProcessOnLattice assemble_deflator(const ProcessOnLattice& EM, const ProcessOnLattice& V_star) {
    require(EM.size() == V_star.size(), ErrorKind::DimensionMismatch, "assemble_deflator: shape");
    ProcessOnLattice xi(EM.size());
    for (std::size_t i = 0; i < EM.size(); ++i) {
        require(EM[i] > 0.0 && V_star[i] > 0.0, ErrorKind::InvalidInput,
                "assemble_deflator: processes must be positive");
        xi[i] = EM[i] / V_star[i];
    }
    return xi;
}

/// Full lattice pipeline: numeraire, change, rebalancing, E(M), xi.
inline DeflatorBundle deflate_lattice(const LatticeModel& model, const SolverOptions& opt = {},
                                      double tol = kDeflatorTolerance) {
    DeflatorBundle out;
    const auto num = solve_lattice_numeraire(model, opt);
    if (!num.all_solved) {
        out.findings.push_back("node " + std::to_string(*num.first_failure) +
                               ": no pre-numeraire portfolio (immediate arbitrage)");
        return out;
    }
    out.rho = num.rho;
    out.V_star = wealth_path(model, num.rho);
    out.changed = numeraire_change(model, out.V_star);

    out.slices.resize(model.size());
    std::vector<UTable> U(model.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model.node(i).is_leaf()) continue;
        out.slices[i] = deflate_slice(node_characteristic(*out.changed, i), true, out.findings,
                                      "node " + std::to_string(i), tol);
        U[i] = out.slices[i]->U;
        if (out.slices[i]->in_D && U[i].empty()) return out;  // rebalancing failed, already reported
    }
    auto ed = exponential_density(*out.changed, U);
    out.EM = std::move(ed.EM);
    out.lepingle_sum = ed.lepingle_sum;
    out.reference_total = ed.reference_total;
    out.lepingle_slack = ed.lepingle_slack;
    out.max_compensator = ed.max_compensator;
    if (out.lepingle_slack < -1e-12) out.findings.push_back("Lepingle budget exceeded");
    out.xi = assemble_deflator(out.EM, out.V_star);
    return out;
}

/// Holdings in asset units, one vector per node (ignored at leaves).
using Strategy = std::vector<Vector>;

/// H = 0 and, for each asset, one unit of initial wealth held in it.
inline std::vector<Strategy> standard_strategies(const LatticeModel& model) {
    std::vector<Strategy> out;
    out.emplace_back(model.size(), Vector::Zero(model.dim()));
    for (int i = 0; i < model.dim(); ++i) {
        Vector h = Vector::Zero(model.dim());
        h(i) = 1.0 / model.S0()(i);
        out.emplace_back(model.size(), h);
    }
    return out;
}

/// Self-financing holdings from random admissible proportions at each node.
template <class Rng>
Strategy random_admissible_strategy(const LatticeModel& model, Rng& rng, double radius = 10.0) {
    std::vector<Vector> pi(model.size(), Vector::Zero(model.dim()));
    for (std::size_t i = 0; i < model.size(); ++i)
        if (!model.node(i).is_leaf())
            pi[i] = 0.99 * sample_in_C(node_characteristic(model, i), rng, radius);
    return numeraire_wealth(model, pi).H;
}

struct VerificationRow {
    std::size_t node = 0;
    std::size_t strategy = 0;
    double violation = 0.0;
};

struct DeflatorVerification {
    std::vector<VerificationRow> rows;  // worst node per strategy
    double max_violation = 0.0;
};

/// For each strategy H: max over internal nodes of
/// |E[xi (1 + H'.S) | node] - xi (1 + H'.S)|.
inline DeflatorVerification verify_deflator(const LatticeModel& model, const ProcessOnLattice& xi,
                                            const std::vector<Strategy>& strategies) {
    require(xi.size() == model.size(), ErrorKind::DimensionMismatch, "verify_deflator: shape");
    for (double v : xi) require(v > 0.0, ErrorKind::InvalidInput, "verify_deflator: xi must be positive");
    const auto S = price_paths(model);
    DeflatorVerification out;
    for (std::size_t h = 0; h < strategies.size(); ++h) {
        const auto gains = accumulate_gains(model, S, strategies[h]);
        ProcessOnLattice deflated(model.size());
        for (std::size_t i = 0; i < model.size(); ++i) deflated[i] = xi[i] * (1.0 + gains[i]);
        const auto check = verify_martingale(model, deflated);
        out.rows.push_back({check.worst_node, h, check.max_violation});
        out.max_violation = std::max(out.max_violation, check.max_violation);
    }
    return out;
}

} // namespace nupbr
