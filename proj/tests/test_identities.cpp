#include "oracles.hpp"
#include "suites.hpp"

#include <qkm/identities.hpp>

#include <gtest/gtest.h>

#include <random>

using qkm::LoopMeasure;
using qkm::ModelSpec;
using qkm::OmegaTarget;
using qkm::Rational;

namespace {

/// Contour radius in lambda kept well inside the disc of convergence of the exact forms.
qkm::ContourSpec contour_for(const ModelSpec& m) {
    double smallest = m.e.front().get_d();
    for (const auto& e : m.e) smallest = std::min(smallest, e.get_d());
    return {0.0, std::min(0.02, smallest * smallest / 8), 64};
}

}  // namespace

TEST(CreationOperator, ExactZeroResidualsUpToThreeValues) {
    std::mt19937_64 rng(31);
    for (int d = 1; d <= 3; ++d) {
        auto m = qkm::cli::random_model(rng, d);
        auto s = qkm::cli::suite_propT(m, 2);
        EXPECT_TRUE(s.pass) << s.report.dump();
    }
}

TEST(CreationOperator, ReportCountsTermsAndOrders) {
    std::mt19937_64 rng(32);
    auto m = qkm::cli::random_model(rng, 2);
    auto rep = qkm::propT_check(m, {{0}, {1}}, 1, 2);
    EXPECT_EQ(rep.residual.size(), 3u);
    EXPECT_GT(rep.split_terms, 0);
    EXPECT_TRUE(rep.exact_zero());
}

TEST(NPointRecursion, FourPointFromTwoPoint) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 3; ++trial) {
        auto mu = LoopMeasure<Rational>::from_model(qkm::oracle::random_model(rng, 2));
        std::vector<Rational> p = {Rational(1, 3), Rational(2, 5), Rational(7, 4), Rational(5, 2)};
        EXPECT_EQ(qkm::npoint_recursion(p, 3, mu), qkm::correlator<Rational>({p}, 3, mu));
    }
}

TEST(NPointRecursion, SixPointFromTwoPoint) {
    std::mt19937_64 rng(34);
    auto mu = LoopMeasure<Rational>::from_model(qkm::oracle::random_model(rng, 2));
    std::vector<Rational> p = {Rational(1, 3), Rational(2, 5), Rational(7, 4), Rational(5, 2), Rational(9, 7), Rational(3, 8)};
    EXPECT_EQ(qkm::npoint_recursion(p, 2, mu), qkm::correlator<Rational>({p}, 2, mu));
}

TEST(NPointRecursion, RefusesVanishingDenominators) {
    LoopMeasure<Rational> mu;
    mu.atoms = {{Rational(1), Rational(1)}};
    std::vector<Rational> p = {Rational(1), Rational(2), Rational(1), Rational(3)};
    EXPECT_THROW(qkm::npoint_recursion(p, 1, mu), std::domain_error);
}

TEST(FormPolynomials, GraphSideMatchesExactFormCoefficients) {
    std::mt19937_64 rng(35);
    for (int trial = 0; trial < 3; ++trial) {
        auto m = qkm::cli::random_model(rng, 2);
        auto contour = contour_for(m);
        auto o1 = qkm::perturbative_vs_exact(m, OmegaTarget::Omega1, {0}, 3, contour);
        auto o2 = qkm::perturbative_vs_exact(m, OmegaTarget::Omega2, {0, 1}, 3, contour);
        auto o3 = qkm::perturbative_vs_exact(m, OmegaTarget::Omega3, {0, 1, 1}, 2, contour);
        EXPECT_LT(o1.max_rel, 1e-8);
        EXPECT_LT(o2.max_rel, 1e-8);
        EXPECT_LT(o3.max_rel, 1e-8);
    }
}

TEST(FormPolynomials, CoincidentClassesOnReferenceModel) {
    ModelSpec m;
    m.e = {Rational(1, 2), Rational(3, 4)};
    m.r = {Rational(1), Rational(2)};
    m.N = 3;
    auto o2c = qkm::perturbative_vs_exact(m, OmegaTarget::Omega2, {1, 1}, 3, {0.0, 0.02, 64});
    auto o3c = qkm::perturbative_vs_exact(m, OmegaTarget::Omega3, {0, 0, 1}, 2, {0.0, 0.02, 64});
    EXPECT_LT(o2c.max_rel, 1e-8);
    EXPECT_LT(o3c.max_rel, 1e-8);
}

TEST(FormPolynomials, SqrtOddCoefficientsCancel) {
    std::mt19937_64 rng(36);
    auto m = qkm::cli::random_model(rng, 2);
    double radius = std::sqrt(contour_for(m).radius) * 0.7;
    auto par = qkm::omega3_sqrt_parity(m, {0, 1, 1}, 6, radius);
    EXPECT_LT(par.max_odd, 1e-8);
    // the cancellation needs both members of each conjugate pair
    EXPECT_GT(par.max_odd_half_sum, 1e-4);
}

TEST(FormPolynomials, CorrelatorAssemblyIsSymmetric) {
    std::mt19937_64 rng(37);
    auto m = qkm::oracle::random_model(rng, 3);
    EXPECT_EQ(qkm::omega2_from_correlators<Rational>(m, 0, 2, 3), qkm::omega2_from_correlators<Rational>(m, 2, 0, 3));
    auto a = qkm::omega3_from_correlators<Rational>(m, 0, 1, 2, 2);
    EXPECT_EQ(a, qkm::omega3_from_correlators<Rational>(m, 2, 0, 1, 2));
    EXPECT_EQ(a, qkm::omega3_from_correlators<Rational>(m, 1, 0, 2, 2));
}

TEST(CountTable, EnumerationAndClosedFormsAgree) {
    auto rows = qkm::count_table(4, 4, 3, 2, true);
    std::vector<long> o1 = {1, 2, 9, 54, 378}, o2 = {1, 7, 58, 522, 4941};
    for (const auto& r : rows) {
        auto v = static_cast<std::size_t>(r.order);
        ASSERT_TRUE(r.omega1_enum.has_value());
        EXPECT_EQ(*r.omega1_enum, Rational(o1[v]));
        EXPECT_EQ(r.omega1_closed, Rational(o1[v]));
        EXPECT_EQ(r.omega2_closed, Rational(o2[v]));
        EXPECT_EQ(r.omega2_tr + r.omega2_btr, r.omega2_closed);
        if (r.omega2_enum) EXPECT_EQ(*r.omega2_enum, r.omega2_closed);
        // the three-point column by two independent routes
        if (r.omega3_enum && r.omega3_closed) EXPECT_NEAR(r.omega3_enum->get_d(), *r.omega3_closed, 1e-6);
    }
}
