#include "nupbr/characteristics.hpp"

#include <gtest/gtest.h>

using namespace nupbr;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }
Matrix m1(double x) { return Matrix::Constant(1, 1, x); }

bool has_code(const ValidationReport& r, const std::string& code) {
    for (const auto& v : r.violations)
        if (v.code == code) return true;
    return false;
}

} // namespace

TEST(Characteristics, ValidSlice) {
    const auto lc = make_characteristic(v1(0.02), m1(0.04), {{v1(0.1), 0.6}, {v1(-0.1), 0.4}});
    EXPECT_TRUE(validate(lc).ok());
}

TEST(Characteristics, NegativeEigenvalueReported) {
    const auto r = validate(make_characteristic(v1(0.0), m1(-0.01), {}));
    ASSERT_TRUE(has_code(r, "c_psd"));
    EXPECT_NE(r.violations.front().message.find("c not PSD, min eigenvalue -0.01"), std::string::npos);
    EXPECT_DOUBLE_EQ(r.violations.front().magnitude, -0.01);
}

TEST(Characteristics, AsymmetryReported) {
    Matrix c(2, 2);
    c << 0, 1, 0, 0;
    const auto r = validate(make_characteristic(Vector::Zero(2), c, {}));
    ASSERT_TRUE(has_code(r, "c_symmetric"));
    EXPECT_NE(r.violations.front().message.find("c not symmetric"), std::string::npos);
    EXPECT_EQ(r.violations.front().magnitude, 1.0);
}

TEST(Characteristics, PsdToleranceBoundary) {
    EXPECT_TRUE(validate(make_characteristic(v1(0.0), m1(-0.5e-10), {})).ok());
    EXPECT_FALSE(validate(make_characteristic(v1(0.0), m1(-2e-10), {})).ok());
}

TEST(Characteristics, StructuralViolations) {
    LocalCharacteristic lc = make_characteristic(v1(0.0), m1(0.0), {});
    lc.dG = 0.0;
    EXPECT_TRUE(has_code(validate(lc), "dG"));
    lc.dG = 1.0;
    lc.b = Vector::Zero(2);
    EXPECT_TRUE(has_code(validate(lc), "dim"));
    lc.b = v1(std::nan(""));
    EXPECT_TRUE(has_code(validate(lc), "finite"));
}

TEST(Characteristics, ValidateIsIdempotent) {
    Matrix c(2, 2);
    c << 1, 0.5, 0, -1;
    const auto lc = make_characteristic(Vector::Zero(2), c, {});
    const auto copy = lc;
    const auto r1 = validate(lc);
    const auto r2 = validate(lc);
    ASSERT_EQ(r1.violations.size(), r2.violations.size());
    for (std::size_t i = 0; i < r1.violations.size(); ++i) {
        EXPECT_EQ(r1.violations[i].code, r2.violations[i].code);
        EXPECT_EQ(r1.violations[i].message, r2.violations[i].message);
    }
    EXPECT_EQ(lc, copy);
}

TEST(Characteristics, DriftRateExamples) {
    EXPECT_DOUBLE_EQ(
        drift_rate(make_characteristic(v1(0.02), m1(0.0), {{v1(0.1), 0.6}, {v1(-0.1), 0.4}}))(0), 0.02);
    EXPECT_NEAR(drift_rate(make_characteristic(v1(0.2), m1(0.0), {{v1(2.0), 0.5}, {v1(-4.0), 0.3}}))(0),
                0.0, 1e-15);
    EXPECT_DOUBLE_EQ(drift_rate(make_characteristic(v1(0.0), m1(0.0), {{v1(2.0), 0.1}}))(0), 0.2);
}

TEST(Characteristics, DriftRateEqualsBWithoutTail) {
    Vector b(2);
    b << 0.3, -0.1;
    Vector z1(2), z2(2);
    z1 << 0.5, 0.5;
    z2 << -0.3, 0.9;
    const auto lc = make_characteristic(b, Matrix::Zero(2, 2), {{z1, 0.4}, {z2, 1.5}});
    EXPECT_EQ(drift_rate(lc), b);
}

TEST(Characteristics, SymmetrizeReportsRemovedAsymmetry) {
    Matrix c(2, 2);
    c << 1.0, 0.4, 0.2, 1.0;
    auto lc = make_characteristic(Vector::Zero(2), c, {});
    EXPECT_NEAR(symmetrize(lc), 0.2, 1e-15);
    EXPECT_NEAR(lc.c(0, 1), 0.3, 1e-15);
    EXPECT_EQ(lc.c, lc.c.transpose());
    EXPECT_EQ(symmetrize(lc), 0.0);
}

TEST(Characteristics, GridValidationAndReferenceTotal) {
    CharacteristicGrid g;
    g.times = {0.0, 0.5, 1.0};
    for (double dG : {0.5, 0.25, 2.0}) g.slices.push_back(make_characteristic(v1(0.0), m1(0.0), {}, dG));
    g.horizon_index = 1;
    EXPECT_NO_THROW(require_valid_grid(g));
    EXPECT_DOUBLE_EQ(g.reference_total(), 0.75);

    auto bad = g;
    bad.times = {0.0, 1.0, 1.0};
    EXPECT_THROW(require_valid_grid(bad), Error);
    bad = g;
    bad.horizon_index = 3;
    EXPECT_THROW(require_valid_grid(bad), Error);
    bad = g;
    bad.slices[1] = make_characteristic(Vector::Zero(2), Matrix::Zero(2, 2), {});
    EXPECT_THROW(require_valid_grid(bad), Error);
}
