#include <qkm/correlators.hpp>
#include <qkm/graphs.hpp>

#include <gtest/gtest.h>

#include <cmath>

using qkm::BoundarySpec;
using qkm::cplx;
using qkm::ModelSpec;
using qkm::Rational;
using qkm::Series;

namespace {

std::vector<Rational> ints(std::initializer_list<long> xs) {
    std::vector<Rational> out;
    for (long x : xs) out.emplace_back(x);
    return out;
}

double eval_series(const Series<Rational>& s, double x) {
    double acc = 0;
    for (int v = s.order(); v >= 0; --v) acc = acc * x + s[v].get_d();
    return acc;
}

ModelSpec two_value_model(double lambda) {
    ModelSpec m;
    m.e = {Rational(1, 2), Rational(3, 4)};
    m.r = {Rational(1), Rational(2)};
    m.N = 3;
    m.lambda = lambda;
    return m;
}

ModelSpec one_value_model(double lambda) {
    ModelSpec m;
    m.e = {Rational(1, 2)};
    m.r = {Rational(1)};
    m.N = 1;
    m.lambda = lambda;
    return m;
}

}  // namespace

TEST(SingleValueSeries, TwoPointAndFormSplits) {
    qkm::D1Series s(Rational(1, 2), 5);
    EXPECT_EQ(qkm::counts_of(s.two_point), ints({1, 2, 9, 54, 378, 2916}));
    EXPECT_EQ(qkm::counts_of(s.omega2_tr), ints({0, 1, 13, 144, 1539, 16335}));
    EXPECT_EQ(qkm::counts_of(s.omega2_blob), ints({1, 6, 45, 378, 3402, 32076}));
}

TEST(SingleValueSeries, FourPointAndTwoTwoPointDisplayedCoefficients) {
    qkm::D1Series s(Rational(1, 2), 5);
    EXPECT_EQ(qkm::counts_of(s.four_point), ints({0, 1, 10, 90, 810, 7425}));
    EXPECT_EQ(qkm::counts_of(s.two_two_point), ints({0, 0, 6, 108, 1458, 17820}));
}

TEST(SingleValueSeries, FactorialFormulasAgreeAtGeneralValue) {
    for (Rational e : {Rational(1, 2), Rational(3, 4), Rational(5, 3)}) {
        qkm::D1Series s(e, 6);
        auto fs = qkm::d1_fully_simple_series(6, e);
        EXPECT_EQ(s.four_point, fs.four_point);
        EXPECT_EQ(s.two_two_point, fs.two_two_point);
    }
}

TEST(SingleValueSeries, EnumerationAgreesWithClosedForms) {
    qkm::D1Series s(Rational(1, 2), 3);
    EXPECT_EQ(qkm::counting_series(BoundarySpec::from_lengths({4}), 0, 3), s.four_point);
    EXPECT_EQ(qkm::counting_series(BoundarySpec::from_lengths({2, 2}), 0, 3), s.two_two_point);
}

TEST(SingleValueSeries, NumericClosedFormsMatchSeries) {
    qkm::D1Series s(Rational(3, 4), 14);
    double lam = 0.004;
    auto f = qkm::d1_closed_forms(0.75, 1.0, lam);
    EXPECT_NEAR(f.two_point, eval_series(s.two_point, lam), 1e-13);
    EXPECT_NEAR(f.four_point, eval_series(s.four_point, lam), 1e-13);
    EXPECT_NEAR(f.two_two_point, eval_series(s.two_two_point, lam), 1e-13);
    EXPECT_THROW(qkm::d1_closed_forms(0.5, 1.0, -1.0), std::domain_error);
}

TEST(ExactForms, SymmetricUnderPermutations) {
    auto c = qkm::solve_curve(two_value_model(0.03));
    cplx u(0.4, 0.2), v(0.9, -0.1), z(1.3, 0.35);
    EXPECT_NEAR(std::abs(qkm::omega2_exact(c, u, z) - qkm::omega2_exact(c, z, u)), 0.0, 1e-13);
    cplx w = qkm::omega3_exact(c, u, v, z);
    EXPECT_NEAR(std::abs(qkm::omega3_exact(c, v, z, u) - w), 0.0, 1e-12 * std::abs(w));
    EXPECT_NEAR(std::abs(qkm::omega3_exact(c, z, u, v) - w), 0.0, 1e-12 * std::abs(w));
}

TEST(ExactForms, ConfluentSplitSumsToCoincidentValue) {
    auto c = qkm::solve_curve(one_value_model(0.02));
    cplx E = c.epsilon()[0];
    auto split = qkm::omega2_confluent_split(c, E);
    cplx coincident = qkm::omega2_coincident(c, E, E);
    EXPECT_NEAR(std::abs(split.tr + split.blob - coincident), 0.0, 1e-9);
}

TEST(ExactForms, SingleValueTwoPointAtSpectralPoint) {
    double lam = 0.01;
    auto c = qkm::solve_curve(one_value_model(lam));
    qkm::D1Series s(Rational(1, 2), 12);
    // Omega_1 at eps reproduces the two-point function with both legs at e
    EXPECT_NEAR(std::abs(qkm::omega1_exact(c, c.epsilon()[0]) - eval_series(s.two_point, lam)), 0.0, 1e-12);
}

TEST(PlanarFreeEnergy, IntermediateValues) {
    double lam = 0.01;
    auto c = qkm::solve_curve(one_value_model(lam));
    auto p = qkm::free_energy_planar(c);
    EXPECT_NEAR(p.temperature.at("+eps"), -lam, 1e-10);
    EXPECT_NEAR(p.temperature.at("-eps"), lam, 1e-10);
    EXPECT_NEAR(p.temperature.at("inf"), 0.0, 1e-10);
    EXPECT_NEAR(p.tmu_sum, p.tmu_printed, 1e-10);
    EXPECT_NEAR(p.residue_term.at("-eps"), p.residue_corrected, 1e-10);
    EXPECT_NEAR(p.graph_series, eval_series(qkm::free_energy_closed_series(10, Rational(1, 2)), lam), 1e-10);
}

TEST(PlanarFreeEnergy, QuadrangulationSeriesMatchesVacuumCoefficients) {
    auto q = qkm::quadrangulation_series(5, true);
    std::vector<Rational> expected = {Rational(0), Rational(1, 2), Rational(9, 8), Rational(9, 2), Rational(189, 8), Rational(729, 5)};
    for (int v = 0; v <= 5; ++v) EXPECT_EQ(q[v], expected[static_cast<std::size_t>(v)]) << "order " << v;
    EXPECT_EQ(qkm::counts_of(qkm::free_energy_closed_series(5, Rational(1, 2))), (std::vector<Rational>(expected.begin(), expected.end())));
    double lam = 0.01;
    EXPECT_NEAR(qkm::quadrangulation_gf(-lam, true) - qkm::quadrangulation_gf(0.0, true), eval_series(qkm::quadrangulation_series(14, true).scaled_argument(Rational(-1)), lam), 1e-13);
}

TEST(PlanarFreeEnergy, RestrictedToSingleValue) {
    auto c = qkm::solve_curve(two_value_model(0.01));
    EXPECT_THROW(qkm::free_energy_planar(c), std::domain_error);
    EXPECT_THROW(qkm::quadrangulation_gf(0.2), std::domain_error);
}
