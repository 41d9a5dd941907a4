#include "nupbr/simplex.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nupbr;
using lp::Problem;
using lp::Sense;
using lp::Status;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

} // namespace

TEST(Simplex, TextbookMaximum) {
    // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
    Problem p;
    p.objective = vec({3, 5});
    p.add(vec({1, 0}), Sense::LessEq, 4);
    p.add(vec({0, 2}), Sense::LessEq, 12);
    p.add(vec({3, 2}), Sense::LessEq, 18);
    const auto r = lp::solve(p);
    ASSERT_EQ(r.status, Status::Optimal);
    EXPECT_NEAR(r.x(0), 2.0, 1e-12);
    EXPECT_NEAR(r.x(1), 6.0, 1e-12);
    EXPECT_NEAR(r.objective, 36.0, 1e-12);
}

TEST(Simplex, EqualityAndGreaterEqMinimum) {
    // min x + 2y, x + y = 3, x >= 1, y >= 0.5 -> (2.5, 0.5), 3.5
    Problem p;
    p.maximize = false;
    p.objective = vec({1, 2});
    p.add(vec({1, 1}), Sense::Equal, 3);
    p.add(vec({1, 0}), Sense::GreaterEq, 1);
    p.add(vec({0, 1}), Sense::GreaterEq, 0.5);
    const auto r = lp::solve(p);
    ASSERT_EQ(r.status, Status::Optimal);
    EXPECT_NEAR(r.x(0), 2.5, 1e-12);
    EXPECT_NEAR(r.x(1), 0.5, 1e-12);
    EXPECT_NEAR(r.objective, 3.5, 1e-12);
}

TEST(Simplex, DetectsInfeasibleAndUnbounded) {
    Problem inf;
    inf.objective = vec({1});
    inf.add(vec({1}), Sense::LessEq, 1);
    inf.add(vec({1}), Sense::GreaterEq, 2);
    EXPECT_EQ(lp::solve(inf).status, Status::Infeasible);

    Problem unb;
    unb.objective = vec({1, 1});
    unb.add(vec({1, -1}), Sense::LessEq, 1);
    EXPECT_EQ(lp::solve(unb).status, Status::Unbounded);
}

TEST(Simplex, RedundantEqualitiesAndNegativeRhs) {
    Problem p;
    p.maximize = false;
    p.objective = vec({1, 1, 1});
    p.add(vec({1, 1, 0}), Sense::Equal, 2);
    p.add(vec({2, 2, 0}), Sense::Equal, 4);
    p.add(vec({0, -1, -1}), Sense::LessEq, -1.5);
    const auto r = lp::solve(p);
    ASSERT_EQ(r.status, Status::Optimal);
    EXPECT_NEAR(r.objective, 2.0, 1e-12);
    EXPECT_NEAR(r.x(0) + r.x(1), 2.0, 1e-12);
    EXPECT_GE(r.x(1) + r.x(2), 1.5 - 1e-12);
}

TEST(Simplex, DegenerateVertexTerminates) {
    // Many constraints active at the optimum (0, 0).
    Problem p;
    p.objective = vec({-1, -1});
    for (int k = 1; k <= 8; ++k) p.add(vec({1.0, static_cast<double>(k)}), Sense::GreaterEq, 0);
    p.add(vec({1, 1}), Sense::LessEq, 1);
    const auto r = lp::solve(p);
    ASSERT_EQ(r.status, Status::Optimal);
    EXPECT_NEAR(r.objective, 0.0, 1e-14);
}

TEST(SimplexProperty, MatchesVertexEnumerationIn2d) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.5, 2.0);
    for (int trial = 0; trial < 300; ++trial) {
        Problem p;
        p.objective = vec({u(rng), u(rng)});
        std::vector<Vector> rows{vec({1, 0}), vec({0, 1})};
        std::vector<double> rhs{2.0, 2.0};
        p.add(rows[0], Sense::LessEq, 2.0);
        p.add(rows[1], Sense::LessEq, 2.0);
        for (int k = 0; k < 4; ++k) {
            Vector a = vec({u(rng), u(rng)});
            const double r = pos(rng);
            p.add(a, Sense::LessEq, r);
            rows.push_back(a);
            rhs.push_back(r);
        }
        // Vertex enumeration over pairs of tight constraints (including x, y >= 0).
        rows.push_back(vec({-1, 0}));
        rhs.push_back(0.0);
        rows.push_back(vec({0, -1}));
        rhs.push_back(0.0);
        double best = -1e300;
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = i + 1; j < rows.size(); ++j) {
                Eigen::Matrix2d A;
                A << rows[i](0), rows[i](1), rows[j](0), rows[j](1);
                if (std::abs(A.determinant()) < 1e-12) continue;
                const Eigen::Vector2d x = A.partialPivLu().solve(Eigen::Vector2d(rhs[i], rhs[j]));
                bool feas = true;
                for (std::size_t k = 0; k < rows.size(); ++k)
                    feas = feas && rows[k].dot(Vector(x)) <= rhs[k] + 1e-9;
                if (feas) best = std::max(best, p.objective.dot(Vector(x)));
            }
        const auto r = lp::solve(p);
        ASSERT_EQ(r.status, Status::Optimal);
        EXPECT_NEAR(r.objective, best, 1e-9);
    }
}
