#pragma once

// Local characteristic (b, c, nu) of the return process relative to a
// reference increment dG, truncation x 1{|x| <= 1}.

#include "nupbr/measure.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

namespace nupbr {

inline constexpr double kPsdTolerance = 1e-10;

struct LocalCharacteristic {
    Vector b;            // truncated drift rate
    Matrix c;            // continuous covariation rate
    DiscreteMeasure nu;  // jump compensator rate
    double dG = 1.0;

    int dim() const noexcept { return nu.dim(); }

    friend bool operator==(const LocalCharacteristic& x, const LocalCharacteristic& y) {
        return x.b.size() == y.b.size() && x.b == y.b && x.c.rows() == y.c.rows() &&
               x.c.cols() == y.c.cols() && x.c == y.c && x.nu == y.nu && x.dG == y.dG;
    }
};

/// Convenience constructor for tests and samples: nu from (point, weight) pairs.
inline LocalCharacteristic make_characteristic(Vector b, Matrix c, std::vector<Atom> atoms,
                                               double dG = 1.0,
                                               SupportEnvelope env = SupportEnvelope::Bounded) {
    const int d = static_cast<int>(b.size());
    return {std::move(b), std::move(c), DiscreteMeasure(d, std::move(atoms), env), dG};
}

struct Violation {
    std::string code;
    std::string message;
    double magnitude = 0.0;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const noexcept { return violations.empty(); }
};

inline ValidationReport validate(const LocalCharacteristic& lc) {
    ValidationReport report;
    auto add = [&](std::string code, std::string msg, double mag) {
        report.violations.push_back({std::move(code), std::move(msg), mag});
    };
    const int d = lc.dim();
    if (lc.b.size() != d) {
        add("dim", "b has length " + std::to_string(lc.b.size()) + ", expected " + std::to_string(d), 0.0);
        return report;
    }
    if (lc.c.rows() != d || lc.c.cols() != d) {
        add("dim", "c is not " + std::to_string(d) + "x" + std::to_string(d), 0.0);
        return report;
    }
    if (!lc.b.allFinite() || !lc.c.allFinite()) add("finite", "b or c has non-finite entries", 0.0);
    if (!(lc.dG > 0.0) || !std::isfinite(lc.dG)) add("dG", "dG must be strictly positive", lc.dG);

    const double asym = (lc.c - lc.c.transpose()).cwiseAbs().maxCoeff();
    if (asym > 0.0) {
        std::ostringstream os;
        os << "c not symmetric, max |c - c^T| = " << asym;
        add("c_symmetric", os.str(), asym);
    } else if (lc.c.allFinite()) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(lc.c, Eigen::EigenvaluesOnly);
        const double lo = d > 0 ? eig.eigenvalues().minCoeff() : 0.0;
        if (lo < -kPsdTolerance) {
            std::ostringstream os;
            os << "c not PSD, min eigenvalue " << lo;
            add("c_psd", os.str(), lo);
        }
    }

    const double small_moment = integrate(lc.nu, [](const Vector& x) {
        return std::min(x.squaredNorm(), 1.0);
    });
    if (!std::isfinite(small_moment)) add("nu_moment", "integral of |x|^2 ^ 1 is not finite", small_moment);
    for (const auto& a : lc.nu.atoms())
        if (!(a.weight > 0.0)) add("nu_weight", "nonpositive atom weight", a.weight);
    return report;
}

/// x^v = b + int x 1{|x|>1} nu(dx). Always defined for finite atoms.
inline Vector drift_rate(const LocalCharacteristic& lc) {
    return lc.b + barycenter(tail_beyond_radius(lc.nu).restricted);
}

/// Symmetrize c in place; returns the asymmetry that was removed.
inline double symmetrize(LocalCharacteristic& lc) {
    const double asym = (lc.c - lc.c.transpose()).cwiseAbs().maxCoeff();
    if (asym > 0.0) lc.c = (0.5 * (lc.c + lc.c.transpose())).eval();
    return asym;
}

struct CharacteristicGrid {
    std::vector<double> times;
    std::vector<LocalCharacteristic> slices;
    std::size_t horizon_index = 0;

    int dim() const { return slices.empty() ? 0 : slices.front().dim(); }

    /// Sum of dG over slices with index <= horizon_index.
    double reference_total() const {
        double g = 0.0;
        for (std::size_t i = 0; i <= horizon_index && i < slices.size(); ++i) g += slices[i].dG;
        return g;
    }

    friend bool operator==(const CharacteristicGrid&, const CharacteristicGrid&) = default;
};

/// Structural checks of the grid; slice-level checks go through validate().
inline void require_valid_grid(const CharacteristicGrid& grid) {
    require(!grid.slices.empty(), ErrorKind::InvalidInput, "grid has no slices");
    require(grid.times.size() == grid.slices.size(), ErrorKind::InvalidInput,
            "grid needs one time per slice");
    require(grid.times.front() >= 0.0, ErrorKind::InvalidInput, "grid times must start at >= 0");
    for (std::size_t i = 1; i < grid.times.size(); ++i)
        require(grid.times[i] > grid.times[i - 1], ErrorKind::InvalidInput,
                "grid times must be strictly increasing");
    require(grid.horizon_index < grid.slices.size(), ErrorKind::InvalidInput,
            "horizon index out of range");
    const int d = grid.slices.front().dim();
    for (const auto& s : grid.slices)
        require_dim(s.dim(), d, "grid slice");
}

} // namespace nupbr
