#pragma once

// Finite atomic measures on R^d.

#include "nupbr/core.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace nupbr {

/// Declared shape of the support beyond the stored atoms. Only cone
/// computations read it; integrals never do.
enum class SupportEnvelope { Bounded, UnboundedAllDirections };

struct Atom {
    Vector point;
    double weight = 0.0;
};

inline bool same_point(const Vector& a, const Vector& b) {
    return a.size() == b.size() && (a.array() == b.array()).all();
}

class DiscreteMeasure {
public:
    explicit DiscreteMeasure(int dim = 1, SupportEnvelope envelope = SupportEnvelope::Bounded)
        : dim_(dim), envelope_(envelope) {
        require(dim > 0, ErrorKind::InvalidInput, "measure dimension must be positive");
    }

    DiscreteMeasure(int dim, std::vector<Atom> atoms,
                    SupportEnvelope envelope = SupportEnvelope::Bounded)
        : DiscreteMeasure(dim, envelope) {
        atoms_.reserve(atoms.size());
        for (auto& a : atoms) add(std::move(a.point), a.weight);
    }

    int dim() const noexcept { return dim_; }
    SupportEnvelope envelope() const noexcept { return envelope_; }
    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    std::size_t size() const noexcept { return atoms_.size(); }
    bool empty() const noexcept { return atoms_.empty(); }

    double mass() const {
        double sum = 0.0;
        for (const auto& a : atoms_) sum += a.weight;
        return sum;
    }

    /// Weight stored at `point`, 0 if it is not an atom.
    double weight_at(const Vector& point) const {
        for (const auto& a : atoms_)
            if (same_point(a.point, point)) return a.weight;
        return 0.0;
    }

    DiscreteMeasure with_envelope(SupportEnvelope envelope) const {
        DiscreteMeasure copy = *this;
        copy.envelope_ = envelope;
        return copy;
    }

    /// Same atoms, new weights (strictly positive, one per atom).
    DiscreteMeasure reweighted(const std::vector<double>& weights) const {
        require(weights.size() == atoms_.size(), ErrorKind::DimensionMismatch,
                "reweighted: one weight per atom required");
        DiscreteMeasure out(dim_, envelope_);
        for (std::size_t i = 0; i < atoms_.size(); ++i) out.add(atoms_[i].point, weights[i]);
        return out;
    }

    friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
        if (a.dim_ != b.dim_ || a.envelope_ != b.envelope_ || a.atoms_.size() != b.atoms_.size())
            return false;
        for (std::size_t i = 0; i < a.atoms_.size(); ++i)
            if (!same_point(a.atoms_[i].point, b.atoms_[i].point) ||
                a.atoms_[i].weight != b.atoms_[i].weight)
                return false;
        return true;
    }

private:
    void add(Vector point, double weight) {
        require_dim(point.size(), dim_, "DiscreteMeasure atom");
        require(std::isfinite(weight) && weight > 0.0, ErrorKind::InvalidInput,
                "atom weights must be finite and strictly positive");
        require(point.allFinite(), ErrorKind::InvalidInput, "atom points must be finite");
        for (const auto& a : atoms_)
            require(!same_point(a.point, point), ErrorKind::InvalidInput,
                    "atom points must be pairwise distinct");
        atoms_.push_back({std::move(point), weight});
    }

    int dim_;
    SupportEnvelope envelope_;
    std::vector<Atom> atoms_;
};

/// Sum of w_i f(z_i) in atom insertion order.
template <class F>
double integrate(const DiscreteMeasure& m, F&& f) {
    double sum = 0.0;
    for (const auto& a : m.atoms()) sum += a.weight * f(a.point);
    return sum;
}

inline DiscreteMeasure convolve_dirac(const DiscreteMeasure& m, const Vector& shift) {
    require_dim(shift.size(), m.dim(), "convolve_dirac");
    std::vector<Atom> atoms;
    atoms.reserve(m.size());
    for (const auto& a : m.atoms()) atoms.push_back({a.point + shift, a.weight});
    return DiscreteMeasure(m.dim(), std::move(atoms), m.envelope());
}

struct Tail {
    double mass = 0.0;
    DiscreteMeasure restricted;
};

/// Atoms strictly outside the Euclidean ball of radius r.
inline Tail tail_beyond_radius(const DiscreteMeasure& m, double r = 1.0) {
    require(r > 0.0, ErrorKind::InvalidInput, "tail radius must be positive");
    std::vector<Atom> atoms;
    double mass = 0.0;
    for (const auto& a : m.atoms()) {
        if (a.point.norm() > r) {
            atoms.push_back(a);
            mass += a.weight;
        }
    }
    return {mass, DiscreteMeasure(m.dim(), std::move(atoms), m.envelope())};
}

/// Atoms inside the closed ball of radius r (complement of the tail).
inline DiscreteMeasure inside_radius(const DiscreteMeasure& m, double r = 1.0) {
    std::vector<Atom> atoms;
    for (const auto& a : m.atoms())
        if (!(a.point.norm() > r)) atoms.push_back(a);
    return DiscreteMeasure(m.dim(), std::move(atoms), m.envelope());
}

/// Unnormalized first moment.
inline Vector barycenter(const DiscreteMeasure& m) {
    Vector sum = Vector::Zero(m.dim());
    for (const auto& a : m.atoms()) sum += a.weight * a.point;
    return sum;
}

/// Sum of |w1(z) - w2(z)| over the union of supports.
inline double tv_distance(const DiscreteMeasure& m1, const DiscreteMeasure& m2) {
    require_dim(m2.dim(), m1.dim(), "tv_distance");
    double sum = 0.0;
    for (const auto& a : m1.atoms()) sum += std::abs(a.weight - m2.weight_at(a.point));
    for (const auto& a : m2.atoms()) {
        bool shared = false;
        for (const auto& b : m1.atoms())
            if (same_point(a.point, b.point)) { shared = true; break; }
        if (!shared) sum += a.weight;
    }
    return sum;
}

} // namespace nupbr
