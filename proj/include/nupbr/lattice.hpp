#pragma once

// Finite event-tree markets. Nodes are stored so that every parent precedes
// its children; forward passes walk the node array in order, backward
// passes in reverse. Children are always visited in branch order, which
// keeps every reduction bit-reproducible.

#include "nupbr/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace nupbr {

inline constexpr std::size_t kMaxLatticeDepth = 6;
inline constexpr std::size_t kMaxLatticeBranching = 4;

using ProcessOnLattice = std::vector<double>;

struct LatticeBranch {
    double prob = 0.0;
    Vector jump;  // return increment dX, componentwise > -1
    std::size_t child = 0;
};

struct LatticeNode {
    std::vector<LatticeBranch> branches;
    double dG = 1.0;
    std::size_t parent = 0;
    std::size_t depth = 0;

    bool is_leaf() const noexcept { return branches.empty(); }
};

class LatticeModel {
public:
    LatticeModel() = default;

    LatticeModel(int dim, Vector S0) : dim_(dim), S0_(std::move(S0)) {
        require(dim > 0, ErrorKind::InvalidInput, "lattice dimension must be positive");
        require_dim(S0_.size(), dim, "lattice S0");
        nodes_.push_back({});
    }

    int dim() const noexcept { return dim_; }
    const Vector& S0() const noexcept { return S0_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    const LatticeNode& node(std::size_t i) const { return nodes_.at(i); }
    const std::vector<LatticeNode>& nodes() const noexcept { return nodes_; }

    /// Appends a child below `parent`; returns the child's id.
    std::size_t add_branch(std::size_t parent, double prob, Vector jump) {
        require(parent < nodes_.size(), ErrorKind::InvalidInput, "add_branch: unknown parent");
        require_dim(jump.size(), dim_, "lattice branch jump");
        const std::size_t id = nodes_.size();
        LatticeNode child;
        child.parent = parent;
        child.depth = nodes_[parent].depth + 1;
        nodes_.push_back(std::move(child));
        nodes_[parent].branches.push_back({prob, std::move(jump), id});
        return id;
    }

    void set_dG(std::size_t node, double dG) { nodes_.at(node).dG = dG; }

    std::size_t depth() const {
        std::size_t d = 0;
        for (const auto& n : nodes_) d = std::max(d, n.depth);
        return d;
    }

    std::size_t max_branching() const {
        std::size_t b = 0;
        for (const auto& n : nodes_) b = std::max(b, n.branches.size());
        return b;
    }

    std::vector<std::size_t> internal_nodes() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (!nodes_[i].is_leaf()) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> leaves() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].is_leaf()) out.push_back(i);
        return out;
    }

    friend bool operator==(const LatticeModel& a, const LatticeModel& b) {
        if (a.dim_ != b.dim_ || a.S0_.size() != b.S0_.size() || a.S0_ != b.S0_ ||
            a.nodes_.size() != b.nodes_.size())
            return false;
        for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
            const auto& x = a.nodes_[i];
            const auto& y = b.nodes_[i];
            if (x.dG != y.dG || x.parent != y.parent || x.branches.size() != y.branches.size())
                return false;
            for (std::size_t k = 0; k < x.branches.size(); ++k)
                if (x.branches[k].prob != y.branches[k].prob ||
                    x.branches[k].child != y.branches[k].child ||
                    !same_point(x.branches[k].jump, y.branches[k].jump))
                    return false;
        }
        return true;
    }

private:
    int dim_ = 0;
    Vector S0_;
    std::vector<LatticeNode> nodes_;
};

/// Structural and economic checks; empty result means the model is usable.
inline std::vector<std::string> validate_lattice(const LatticeModel& model,
                                                 bool enforce_positive_prices = true) {
    std::vector<std::string> issues;
    if (model.size() == 0) {
        issues.push_back("lattice has no root");
        return issues;
    }
    if (enforce_positive_prices && (model.S0().array() <= 0.0).any())
        issues.push_back("S0 must be strictly positive");
    if (model.depth() > kMaxLatticeDepth)
        issues.push_back("depth " + std::to_string(model.depth()) + " exceeds cap " +
                         std::to_string(kMaxLatticeDepth));
    if (model.max_branching() > kMaxLatticeBranching)
        issues.push_back("branching " + std::to_string(model.max_branching()) + " exceeds cap " +
                         std::to_string(kMaxLatticeBranching));
    for (std::size_t i = 0; i < model.size(); ++i) {
        const auto& n = model.node(i);
        if (!(n.dG > 0.0)) issues.push_back("node " + std::to_string(i) + ": dG must be positive");
        if (n.is_leaf()) continue;
        std::vector<double> probs;
        for (std::size_t k = 0; k < n.branches.size(); ++k) {
            const auto& br = n.branches[k];
            const std::string where = "node " + std::to_string(i) + " branch " + std::to_string(k);
            if (!(br.prob > 0.0)) issues.push_back(where + ": probability must be positive");
            if (enforce_positive_prices && (br.jump.array() <= -1.0).any())
                issues.push_back(where + ": jump must exceed -1 componentwise");
            probs.push_back(br.prob);
        }
        const double total = compensated_sum(probs);
        if (std::abs(total - 1.0) > 1e-14)
            issues.push_back("node " + std::to_string(i) + ": probabilities sum to " +
                             std::to_string(total));
    }
    return issues;
}

inline void require_valid_lattice(const LatticeModel& model) {
    const auto issues = validate_lattice(model);
    if (!issues.empty()) throw Error(ErrorKind::InvalidInput, "lattice: " + issues.front());
}

/// Branch law at a node read as a local characteristic: nu = law / dG with
/// zero jumps dropped and equal jumps merged, c = 0, b = int x 1{|x|<=1} nu.
inline LocalCharacteristic node_characteristic(const LatticeModel& model, std::size_t node) {
    const auto& n = model.node(node);
    require(!n.is_leaf(), ErrorKind::InvalidInput,
            "node_characteristic: node " + std::to_string(node) + " is a leaf");
    std::vector<Atom> merged;
    for (const auto& br : n.branches) {
        if ((br.jump.array() == 0.0).all()) continue;
        bool found = false;
        for (auto& a : merged)
            if (same_point(a.point, br.jump)) { a.weight += br.prob; found = true; break; }
        if (!found) merged.push_back({br.jump, br.prob});
    }
    for (auto& a : merged) a.weight /= n.dG;
    DiscreteMeasure nu(model.dim(), std::move(merged));
    Vector b = barycenter(inside_radius(nu));
    return {std::move(b), Matrix::Zero(model.dim(), model.dim()), std::move(nu), n.dG};
}

/// Price paths S(child) = S(node) * (1 + dX), one vector per node.
inline std::vector<Vector> price_paths(const LatticeModel& model) {
    std::vector<Vector> S(model.size());
    S[0] = model.S0();
    for (std::size_t i = 0; i < model.size(); ++i)
        for (const auto& br : model.node(i).branches)
            S[br.child] = S[i].cwiseProduct((1.0 + br.jump.array()).matrix());
    return S;
}

/// Wealth of proportions pi (one vector per node; leaves ignored), V0 = 1.
inline ProcessOnLattice wealth_path(const LatticeModel& model, const std::vector<Vector>& pi) {
    require(pi.size() == model.size(), ErrorKind::DimensionMismatch,
            "wealth_path: one proportion vector per node required");
    ProcessOnLattice V(model.size(), 0.0);
    V[0] = 1.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        const auto& n = model.node(i);
        if (n.is_leaf()) continue;
        require_dim(pi[i].size(), model.dim(), "wealth_path proportions");
        for (std::size_t k = 0; k < n.branches.size(); ++k) {
            const auto& br = n.branches[k];
            const double factor = 1.0 + pi[i].dot(br.jump);
            if (!(factor > 0.0))
                throw Error(ErrorKind::InvalidInput,
                            "wealth_path: inadmissible proportions at node " + std::to_string(i) +
                                " branch " + std::to_string(k) + " (1 + pi'dX = " +
                                std::to_string(factor) + ")");
            V[br.child] = V[i] * factor;
        }
    }
    return V;
}

inline double conditional_expectation(const LatticeModel& model, const ProcessOnLattice& proc,
                                      std::size_t node) {
    const auto& n = model.node(node);
    require(!n.is_leaf(), ErrorKind::InvalidInput, "conditional_expectation at a leaf");
    require(proc.size() == model.size(), ErrorKind::DimensionMismatch,
            "conditional_expectation: process shape");
    double e = 0.0;
    for (const auto& br : n.branches) e += br.prob * proc[br.child];
    return e;
}

struct MartingaleCheck {
    double max_violation = -std::numeric_limits<double>::infinity();
    std::size_t worst_node = 0;

    bool passes(double tol) const { return max_violation <= tol; }
};

/// max over internal nodes of E[proc(child) | node] - proc(node).
inline MartingaleCheck verify_supermartingale(const LatticeModel& model,
                                              const ProcessOnLattice& proc) {
    MartingaleCheck out;
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model.node(i).is_leaf()) continue;
        const double v = conditional_expectation(model, proc, i) - proc[i];
        if (v > out.max_violation) { out.max_violation = v; out.worst_node = i; }
    }
    return out;
}

/// Two-sided: max over internal nodes of |E[proc(child) | node] - proc(node)|.
inline MartingaleCheck verify_martingale(const LatticeModel& model, const ProcessOnLattice& proc) {
    MartingaleCheck out;
    out.max_violation = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model.node(i).is_leaf()) continue;
        const double v = std::abs(conditional_expectation(model, proc, i) - proc[i]);
        if (v > out.max_violation) { out.max_violation = v; out.worst_node = i; }
    }
    return out;
}

/// Probability of reaching each node.
inline ProcessOnLattice reach_probabilities(const LatticeModel& model) {
    ProcessOnLattice p(model.size(), 0.0);
    p[0] = 1.0;
    for (std::size_t i = 0; i < model.size(); ++i)
        for (const auto& br : model.node(i).branches) p[br.child] = p[i] * br.prob;
    return p;
}

/// Accumulated reference process G along each path (G at root = 0).
inline ProcessOnLattice reference_paths(const LatticeModel& model) {
    ProcessOnLattice G(model.size(), 0.0);
    for (std::size_t i = 0; i < model.size(); ++i)
        for (const auto& br : model.node(i).branches) G[br.child] = G[i] + model.node(i).dG;
    return G;
}

/// Holdings H (one vector per node, in asset units) applied to price paths;
/// returns the gains process (H'.S) with value 0 at the root.
inline ProcessOnLattice accumulate_gains(const LatticeModel& model, const std::vector<Vector>& S,
                                         const std::vector<Vector>& H) {
    require(S.size() == model.size() && H.size() == model.size(), ErrorKind::DimensionMismatch,
            "accumulate_gains: shape");
    ProcessOnLattice gains(model.size(), 0.0);
    for (std::size_t i = 0; i < model.size(); ++i)
        for (const auto& br : model.node(i).branches)
            gains[br.child] = gains[i] + H[i].dot(S[br.child] - S[i]);
    return gains;
}

} // namespace nupbr
