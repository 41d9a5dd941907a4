#include "nupbr/cones.hpp"
#include "nupbr/numeraire.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nupbr;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }
Matrix m1(double x) { return Matrix::Constant(1, 1, x); }

Vector v2(double x, double y) {
    Vector v(2);
    v << x, y;
    return v;
}

LocalCharacteristic kelly() {
    return make_characteristic(v1(0.02), m1(0.0), {{v1(0.1), 0.6}, {v1(-0.1), 0.4}});
}

void expect_witness_conditions(const LocalCharacteristic& lc, const Vector& p) {
    EXPECT_LE((lc.c.transpose() * p).cwiseAbs().maxCoeff(), 1e-10);
    double positive = 0.0;
    for (const auto& a : lc.nu.atoms()) {
        EXPECT_GE(p.dot(a.point), -1e-12 * std::max(1.0, a.point.norm()));
        if (p.dot(a.point) > 0.0) positive += a.weight;
    }
    const Vector small = barycenter(inside_radius(lc.nu));
    EXPECT_GE(p.dot(lc.b - small), -1e-12);
    EXPECT_TRUE(positive > 0.0 || std::abs(p.dot(lc.b)) > 1e-10);
}

LocalCharacteristic random_slice(std::mt19937_64& rng, int d, int atoms) {
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u;
    Matrix A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = n(rng);
    std::uniform_int_distribution<int> rank_dist(0, d);
    const int r = rank_dist(rng);
    Matrix c = 0.05 * A.leftCols(r) * A.leftCols(r).transpose();
    c = (0.5 * (c + c.transpose())).eval();
    std::vector<Atom> at;
    const double spread = u(rng) < 0.5 ? 0.3 : 2.0;
    for (int k = 0; k < atoms; ++k) {
        Vector z(d);
        for (int i = 0; i < d; ++i) z(i) = spread * n(rng);
        if (u(rng) < 0.5) z = z.cwiseAbs();  // push toward one orthant, so arbitrage occurs often
        at.push_back({z, 0.05 + u(rng)});
    }
    Vector b(d);
    for (int i = 0; i < d; ++i) b(i) = 0.1 * n(rng);
    auto lc = make_characteristic(b, c, std::move(at));
    if (u(rng) < 0.3) lc.b = barycenter(inside_radius(lc.nu));
    return lc;
}

} // namespace

TEST(InC, Examples) {
    const auto lc = make_characteristic(v1(0.0), m1(0.0), {{v1(0.1), 0.5}, {v1(-0.1), 0.5}});
    EXPECT_TRUE(in_C(lc, v1(0.0)));
    EXPECT_TRUE(in_C(lc, v1(2.0)));
    EXPECT_FALSE(in_C(lc, v1(11.0)));
    EXPECT_TRUE(in_C(lc, v1(10.0)));
    EXPECT_THROW(in_C(lc, Vector::Zero(2)), Error);
}

TEST(InC, UnboundedEnvelopeShrinksToOrigin) {
    auto lc = make_characteristic(v1(0.0), m1(0.0), {{v1(0.1), 0.5}}, 1.0,
                                  SupportEnvelope::UnboundedAllDirections);
    EXPECT_TRUE(in_C(lc, v1(0.0)));
    EXPECT_FALSE(in_C(lc, v1(1e-9)));
}

TEST(NullSpace, Examples) {
    // Kernel of [c; (1, 0); (0.1, 0)] is spanned by (0, 1).
    const auto lc = make_characteristic(v2(0.1, 0.0), Matrix::Zero(2, 2), {{v2(1.0, 0.0), 1.0}});
    const auto basis = null_space_N(lc);
    ASSERT_EQ(basis.size(), 1u);
    EXPECT_NEAR(std::abs(basis[0](1)), 1.0, 1e-14);
    EXPECT_NEAR(basis[0](0), 0.0, 1e-14);

    Matrix c(2, 2);
    c << 0.04, 0.01, 0.01, 0.09;
    EXPECT_TRUE(null_space_N(make_characteristic(v2(0.0, 0.0), c, {})).empty());

    const auto free = null_space_N(make_characteristic(Vector::Zero(3), Matrix::Zero(3, 3), {}));
    ASSERT_EQ(free.size(), 3u);
    const Matrix Q = as_columns(free, 3);
    EXPECT_LE((Q.transpose() * Q - Matrix::Identity(3, 3)).norm(), 1e-14);
}

TEST(NullSpace, BasisSatisfiesAllConditions) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 4;
        auto lc = random_slice(rng, d, trial % 3);
        const auto basis = null_space_N(lc);
        const Matrix Q = as_columns(basis, d);
        EXPECT_LE((Q.transpose() * Q - Matrix::Identity(Q.cols(), Q.cols())).norm(), 1e-12);
        for (const auto& n : basis) {
            EXPECT_LE((lc.c * n).cwiseAbs().maxCoeff(), 1e-10);
            EXPECT_LE(std::abs(n.dot(lc.b)), 1e-10);
            for (const auto& a : lc.nu.atoms()) EXPECT_LE(std::abs(n.dot(a.point)), 1e-10);
        }
    }
}

TEST(ImmediateArbitrage, PureDrift) {
    const auto lc = make_characteristic(v1(1.0), m1(0.0), {});
    const auto p = find_immediate_arbitrage(lc);
    ASSERT_TRUE(p.has_value());
    EXPECT_DOUBLE_EQ((*p)(0), 1.0);
    expect_witness_conditions(lc, *p);
}

TEST(ImmediateArbitrage, MertonSliceHasNone) {
    EXPECT_FALSE(find_immediate_arbitrage(make_characteristic(v1(0.02), m1(0.04), {})).has_value());
}

TEST(ImmediateArbitrage, KellySliceHasNone) {
    const auto lc = kelly();
    // Brute-force sign check: both unit directions put weight on a negative jump.
    for (double p : {1.0, -1.0}) {
        bool nonnegative = true;
        for (const auto& a : lc.nu.atoms()) nonnegative = nonnegative && p * a.point(0) >= 0.0;
        EXPECT_FALSE(nonnegative);
    }
    EXPECT_FALSE(find_immediate_arbitrage(lc).has_value());
}

TEST(ImmediateArbitrage, OneSidedJumpsWithNonnegativeDrift) {
    // Only upward jumps and the compensated drift is nonnegative.
    const auto lc = make_characteristic(v1(0.05), m1(0.0), {{v1(0.1), 0.5}});
    const auto p = find_immediate_arbitrage(lc);
    ASSERT_TRUE(p.has_value());
    EXPECT_GT((*p)(0), 0.0);
    expect_witness_conditions(lc, *p);
    // Same jumps but a drift that more than compensates: no arbitrage.
    EXPECT_FALSE(find_immediate_arbitrage(make_characteristic(v1(0.01), m1(0.0), {{v1(0.1), 0.5}})));
}

TEST(ImmediateArbitrage, ZeroDriftDirectionWithPositiveJumps) {
    // Objective is exactly zero on the witness; positive jump mass decides.
    Vector z(2);
    z << 0.5, 0.0;
    const auto lc = make_characteristic(v2(0.25, 0.0), Matrix::Zero(2, 2), {{z, 0.5}});
    const auto p = find_immediate_arbitrage(lc);
    ASSERT_TRUE(p.has_value());
    expect_witness_conditions(lc, *p);
}

TEST(ImmediateArbitrage, HiddenInKernelOfC) {
    // Asset 1 diffuses, asset 2 has a riskless drift.
    Matrix c = Matrix::Zero(2, 2);
    c(0, 0) = 0.04;
    const auto lc = make_characteristic(v2(0.0, 0.03), c, {});
    const auto p = find_immediate_arbitrage(lc);
    ASSERT_TRUE(p.has_value());
    EXPECT_NEAR((*p)(0), 0.0, 1e-12);
    EXPECT_DOUBLE_EQ((*p)(1), 1.0);
}

TEST(ImmediateArbitrage, UnboundedEnvelopeNeverReports) {
    const auto lc = make_characteristic(v1(1.0), m1(0.0), {{v1(0.5), 1.0}}, 1.0,
                                        SupportEnvelope::UnboundedAllDirections);
    EXPECT_FALSE(find_immediate_arbitrage(lc).has_value());
}

TEST(ImmediateArbitrage, WitnessIsReportedModuloN) {
    // Asset 3 is completely inert, so N = span(e3); the witness has no e3 part.
    Vector b(3);
    b << 0.08, 0.0, 0.0;
    Vector z1(3), z2(3);
    z1 << 0.1, 0.2, 0.0;
    z2 << 0.1, -0.2, 0.0;
    const auto lc = make_characteristic(b, Matrix::Zero(3, 3), {{z1, 0.3}, {z2, 0.3}});
    const auto basis = null_space_N(lc);
    ASSERT_EQ(basis.size(), 1u);
    const auto p = find_immediate_arbitrage(lc);
    ASSERT_TRUE(p.has_value());
    EXPECT_LE(std::abs(p->dot(basis[0])), 1e-12);
    expect_witness_conditions(lc, *p);
    // Adding any null direction to the witness keeps it a witness.
    expect_witness_conditions(lc, *p + 3.0 * basis[0]);
}

TEST(ImmediateArbitrageProperty, AgreesWithSphereSweep) {
    std::mt19937_64 rng(32);
    int compared = 0, quarantined = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 3;
        const auto lc = random_slice(rng, d, trial % 7);
        const auto sweep = oracle::sphere_sweep(lc);
        if (std::abs(sweep.margin) < 1e-6) { ++quarantined; continue; }
        const auto p = find_immediate_arbitrage(lc);
        EXPECT_EQ(p.has_value(), sweep.arbitrage) << "trial " << trial << " margin " << sweep.margin;
        if (p) expect_witness_conditions(lc, *p);
        ++compared;
    }
    EXPECT_GT(compared, 150);
    EXPECT_LT(quarantined, 50);
}

TEST(ImmediateArbitrageProperty, EmptyVerdictImpliesSolvableNumeraire) {
    std::mt19937_64 rng(33);
    int solved = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto lc = random_slice(rng, 1 + trial % 4, trial % 8);
        if (find_immediate_arbitrage(lc)) continue;
        SolverOptions opt;
        opt.verification_samples = 50;
        const auto res = pre_numeraire(lc, opt);
        EXPECT_EQ(res.status, SolveStatus::Solved) << "trial " << trial;
        ++solved;
    }
    EXPECT_GT(solved, 50);
}
