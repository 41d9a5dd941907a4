#pragma once

// Brute-force NUPBR verdict on small lattices.

#include "nupbr/numeraire.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace nupbr {

inline constexpr std::size_t kOracleMaxDepth = 4;
inline constexpr std::size_t kOracleMaxBranching = 3;

struct UnboundedProfitWitness {
    std::size_t node = 0;
    Vector direction;         // p with p'dX >= 0 on every branch, > 0 on some
    double min_gain = 0.0;    // smallest positive p'dX
};

struct NupbrVerdict {
    bool holds = true;
    std::optional<UnboundedProfitWitness> witness;
    std::vector<double> K_levels;
    // holds: upper bound on sup over admissible pi of P(V_T(pi) >= K).
    // fails: P(V_T >= 1 + K * min_gain) for the witness scaled by K, which
    //        stays bounded away from zero.
    std::vector<double> probability;
};

/// Per-node immediate-arbitrage search, then a scaling sweep over K_levels.
/// With no arbitrage anywhere, P(V_T >= K) <= P(V*_T >= sqrt K) + 1/sqrt K
/// for every admissible wealth (Markov on the supermartingale V/V*).
inline NupbrVerdict brute_force_unbounded_profit(const LatticeModel& model,
                                                 const std::vector<double>& K_levels,
                                                 const SolverOptions& opt = {}) {
    require(model.depth() <= kOracleMaxDepth && model.max_branching() <= kOracleMaxBranching,
            ErrorKind::InvalidInput,
            "brute_force_unbounded_profit: scale limits exceeded (depth <= 4, branching <= 3)");
    NupbrVerdict out;
    out.K_levels = K_levels;
    const auto reach = reach_probabilities(model);

    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model.node(i).is_leaf()) continue;
        const auto p = find_immediate_arbitrage(node_characteristic(model, i));
        if (!p) continue;
        UnboundedProfitWitness w{i, *p, std::numeric_limits<double>::infinity()};
        for (const auto& br : model.node(i).branches) {
            const double e = p->dot(br.jump);
            if (e > kObjectiveSignTolerance) w.min_gain = std::min(w.min_gain, e);
        }
        out.holds = false;
        for (double K : K_levels) {
            std::vector<Vector> pi(model.size(), Vector::Zero(model.dim()));
            pi[i] = K * *p;
            const auto V = wealth_path(model, pi);
            double prob = 0.0;
            for (std::size_t leaf : model.leaves())
                if (V[leaf] >= (1.0 + K * w.min_gain) * (1.0 - 1e-12)) prob += reach[leaf];
            out.probability.push_back(prob);
        }
        out.witness = std::move(w);
        return out;
    }

    const auto num = solve_lattice_numeraire(model, opt);
    const auto V = wealth_path(model, num.rho);
    for (double K : K_levels) {
        const double a = std::sqrt(std::max(K, 1.0));
        double tail = 0.0;
        for (std::size_t leaf : model.leaves())
            if (V[leaf] >= K / a) tail += reach[leaf];
        out.probability.push_back(std::min(1.0, tail + 1.0 / a));
    }
    return out;
}

} // namespace nupbr
