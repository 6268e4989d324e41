#include "oracles.hpp"
#include "suites.hpp"

#include <qkm/correlators.hpp>
#include <qkm/curve.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using qkm::cplx;
using qkm::ModelSpec;
using qkm::Rational;

namespace {

ModelSpec model(std::vector<Rational> e, std::vector<Rational> r, double lambda) {
    ModelSpec m;
    m.e = std::move(e);
    m.r = std::move(r);
    m.N = 0;
    for (const auto& x : m.r) m.N += x;
    m.lambda = lambda;
    return m;
}

/// Leading small-coupling approximation of the upper ramification point near -e_i.
cplx beta_leading(const ModelSpec& m, int i, double lambda) {
    double N = m.N.get_d(), e = m.e[static_cast<std::size_t>(i)].get_d(), r = m.r[static_cast<std::size_t>(i)].get_d();
    double shift = 0;
    for (int n = 0; n < m.d(); ++n) shift += m.r[static_cast<std::size_t>(n)].get_d() / (e + m.e[static_cast<std::size_t>(n)].get_d());
    return cplx(-e - lambda / N * shift, std::sqrt(lambda * r / N));
}

}  // namespace

TEST(SpectralCurveSolve, SingleValueMatchesClosedForm) {
    for (double lam : {-0.02, 0.001, 0.01, 0.3, 2.0}) {
        for (double e : {0.5, 1.25}) {
            auto m = model({qkm::parse_rational(std::to_string(e))}, {Rational(1)}, lam);
            auto c = qkm::solve_curve(m);
            auto f = qkm::d1_closed_forms(e, 1.0, lam);
            EXPECT_NEAR(c.epsilon()[0].real(), f.epsilon, 1e-12);
            EXPECT_NEAR(std::abs(c.epsilon()[0].imag()), 0.0, 1e-12);
            EXPECT_NEAR((c.rho()[0] * lam / c.N()).real(), f.coupling, 1e-12);
        }
    }
}

TEST(SpectralCurveSolve, VietaResidualSmallAcrossSweeps) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 6; ++trial) {
        auto m = qkm::cli::random_model(rng, 2 + trial % 2);
        for (double lam = 0.002; lam <= 0.2; lam += 0.022) {
            auto c = qkm::solve_curve(m, cplx(lam, 0.0));
            EXPECT_LT(c.vieta_residual(), 1e-12) << "lambda " << lam;
        }
    }
}

TEST(SpectralCurveSolve, ModelEquationsAreSatisfied) {
    auto m = model({Rational(1, 2), Rational(3, 4), Rational(7, 5)}, {Rational(1), Rational(2), Rational(1)}, 0.05);
    auto c = qkm::solve_curve(m);
    // R(eps_k) = e_k and R'(eps_k) rho_k = r_k
    for (int k = 0; k < m.d(); ++k) {
        cplx eps = c.epsilon()[static_cast<std::size_t>(k)];
        EXPECT_NEAR(std::abs(c.R(eps) - m.e[static_cast<std::size_t>(k)].get_d()), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(c.Rp(eps) * c.rho()[static_cast<std::size_t>(k)] - m.r[static_cast<std::size_t>(k)].get_d()), 0.0, 1e-12);
    }
}

TEST(SpectralCurveSolve, InvalidModelIsRejected) {
    ModelSpec m;
    EXPECT_THROW(qkm::solve_curve(m), std::invalid_argument);
    m = model({Rational(1, 2)}, {Rational(-1)}, 0.1);
    EXPECT_THROW(qkm::solve_curve(m), std::invalid_argument);
}

TEST(RamificationPoints, SmallCouplingAsymptotics) {
    auto m = model({Rational(1, 2), Rational(3, 4)}, {Rational(1), Rational(2)}, 0.0);
    std::vector<double> lams = {1e-3, 1e-4, 1e-5};
    for (int i = 0; i < m.d(); ++i) {
        std::vector<double> rem;
        for (double lam : lams) {
            auto c = qkm::solve_curve(m, cplx(lam, 0.0));
            double r = std::abs(c.beta()[static_cast<std::size_t>(i)] - beta_leading(m, i, lam));
            rem.push_back(r);
            EXPECT_LT(r / lam, 1.0);
            EXPECT_NEAR(std::abs(c.beta()[static_cast<std::size_t>(i + m.d())] - std::conj(c.beta()[static_cast<std::size_t>(i)])), 0.0, 1e-14);
        }
        double slope = std::log(rem[0] / rem[2]) / std::log(lams[0] / lams[2]);
        EXPECT_NEAR(slope, 1.5, 0.05) << "branch " << i;
    }
}

TEST(RamificationPoints, ZerosOfDerivativeAndInvolution) {
    auto m = model({Rational(1, 2), Rational(3, 4)}, {Rational(1), Rational(2)}, 0.02);
    auto c = qkm::solve_curve(m);
    for (auto b : c.beta()) EXPECT_LT(std::abs(c.Rp(b)), 1e-12);
    for (int i = 0; i < 2 * c.d(); ++i) {
        cplx q = c.beta()[static_cast<std::size_t>(i)] + cplx(0.01, 0.004);
        cplx s = c.galois_involution(i, q);
        EXPECT_GT(std::abs(s - q), 1e-4);
        EXPECT_LT(std::abs(c.R(s) - c.R(q)), 1e-12);
    }
}

TEST(RamificationPoints, PreimagesCoverEveryValue) {
    auto m = model({Rational(1, 2), Rational(3, 4)}, {Rational(1), Rational(2)}, 0.02);
    auto c = qkm::solve_curve(m);
    for (cplx zeta : {cplx(0.3, 0.1), cplx(-1.0, 0.5), cplx(2.0, -0.3)}) {
        auto pre = c.preimages(zeta);
        EXPECT_EQ(static_cast<int>(pre.size()), c.d() + 1);
        for (auto z : pre) EXPECT_LT(std::abs(c.R(z) - zeta), 1e-11);
    }
}

TEST(CriticalCoupling, EqualMultiplicityTriples) {
    for (const auto& t : qkm::cli::default_critical_triples()) {
        double expected = (t.eps1 - t.eps2) * (t.eps1 - t.eps2) / t.rho;
        auto fam = qkm::CurveFamilySpec::fixed_curve({t.eps1, t.eps2}, {t.rho, t.rho}, 1e-6, 4 * expected);
        auto crit = qkm::critical_lambda(fam);
        EXPECT_NEAR(crit.lambda, expected, 1e-8);
        auto above = fam.at(1.5 * crit.lambda);
        for (int i = 0; i < 2; ++i) EXPECT_NEAR(above.beta()[static_cast<std::size_t>(i)].real(), -0.5 * (t.eps1 + t.eps2), 1e-10);
    }
}

TEST(CriticalCoupling, FamilyValidation) {
    auto fam = qkm::CurveFamilySpec::fixed_curve({0.8, 0.4}, {1, 1}, 0.0, 1.0);
    EXPECT_THROW(fam.validate(), std::invalid_argument);
    fam = qkm::CurveFamilySpec::fixed_curve({0.4, 0.8}, {1, 1}, 1.0, 0.5);
    EXPECT_THROW(fam.validate(), std::invalid_argument);
}

TEST(BranchCutGeometry, SmallCouplingGivesSeparateLoops) {
    auto fam = qkm::CurveFamilySpec::fixed_curve({0.45, 0.82}, {1, 3}, 1e-4, 0.2);
    for (double lam : {0.005, 0.02, 0.04}) {
        auto g = qkm::branch_cut_geometry(fam.at(lam), 400);
        ASSERT_EQ(g.loops.size(), 2u);
        EXPECT_TRUE(g.nesting.empty());
        EXPECT_FALSE(g.any_flagged);
        // each loop encloses exactly one of the centres -eps_k, and every centre is enclosed once
        std::vector<int> enclosed(2, 0);
        for (const auto& loop : g.loops) {
            int inside = 0;
            for (int k = 0; k < 2; ++k)
                if (loop.winding[static_cast<std::size_t>(k)] != 0) {
                    ++inside;
                    ++enclosed[static_cast<std::size_t>(k)];
                }
            EXPECT_EQ(inside, 1);
        }
        EXPECT_EQ(enclosed, (std::vector<int>{1, 1}));
    }
}

TEST(BranchCutGeometry, NestedLoopsAboveTransition) {
    auto fam = qkm::CurveFamilySpec::fixed_curve({0.45, 0.82}, {1, 3}, 1e-4, 0.2);
    auto g = qkm::branch_cut_geometry(fam.at(0.08), 400);
    ASSERT_EQ(g.loops.size(), 2u);
    EXPECT_EQ(g.nesting.size(), 1u);
}

TEST(BranchCutGeometry, ThreeValueFamilyHasTwoTransitions) {
    auto fam = qkm::CurveFamilySpec::fixed_curve({0.45, 0.82, 1.40}, {1, 3, 2}, 1e-4, 0.2);
    int changes = 0;
    std::size_t previous = 0;
    for (int j = 0; j <= 19; ++j) {
        double lam = 0.01 + 0.01 * j;
        auto g = qkm::branch_cut_geometry(fam.at(lam), 300);
        EXPECT_EQ(g.loops.size(), 3u);
        if (j > 0 && g.nesting.size() != previous) ++changes;
        previous = g.nesting.size();
    }
    EXPECT_EQ(changes, 2);
}
