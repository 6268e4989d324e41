// One PASS/FAIL line per acceptance criterion; exit status 1 if any criterion fails.
#include "oracles.hpp"
#include "suites.hpp"

#include <qkm/btr.hpp>
#include <qkm/correlators.hpp>
#include <qkm/curve.hpp>
#include <qkm/graphs.hpp>
#include <qkm/identities.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace qkm;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [mismatch: " << what << "]";
        }
    }
};

int failures = 0;

void criterion(int id, const std::string& title, const std::function<void(Outcome&)>& body) {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& ex) {
        o.pass = false;
        o.detail << " [exception: " << ex.what() << "]";
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " (" << secs << " s)" << o.detail.str()
              << std::endl;
}

std::string sci(double x) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << x;
    return os.str();
}

std::string join(const std::vector<Rational>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i].get_str();
    return s;
}

std::vector<Rational> ints(std::initializer_list<long> xs) {
    std::vector<Rational> out;
    for (long x : xs) out.emplace_back(x);
    return out;
}

ModelSpec reference_model(double lambda) {
    ModelSpec m;
    m.e = {Rational(1, 2), Rational(3, 4)};
    m.r = {Rational(1), Rational(2)};
    m.N = 3;
    m.lambda = lambda;
    return m;
}

ContourSpec contour_for(const ModelSpec& m) {
    double smallest = m.e.front().get_d();
    for (const auto& e : m.e) smallest = std::min(smallest, e.get_d());
    return {0.0, std::min(0.02, smallest * smallest / 8), 64};
}

double eval_series(const Series<Rational>& s, double x) {
    double acc = 0;
    for (int v = s.order(); v >= 0; --v) acc = acc * x + s[v].get_d();
    return acc;
}

}  // namespace

int main() {
    std::cout.precision(6);

    criterion(1, "count table by enumeration and single-value closed forms", [](Outcome& o) {
        auto rows = count_table(5, 4, 3, 2, true);
        std::vector<Rational> o1, o2, o3, o1c, o2c, tr, btr;
        std::vector<double> o3c;
        for (const auto& r : rows) {
            if (r.omega1_enum) o1.push_back(*r.omega1_enum);
            if (r.omega2_enum) o2.push_back(*r.omega2_enum);
            if (r.omega3_enum) o3.push_back(*r.omega3_enum);
            o1c.push_back(r.omega1_closed);
            o2c.push_back(r.omega2_closed);
            tr.push_back(r.omega2_tr);
            btr.push_back(r.omega2_btr);
            o3c.push_back(r.omega3_closed.value_or(NAN));
        }
        o.check(o1 == ints({1, 2, 9, 54, 378}), "one-point enumeration " + join(o1));
        o.check(o2 == ints({1, 7, 58, 522}), "two-point enumeration " + join(o2));
        o.check(o3 == ints({0, 4, 84}), "three-point enumeration " + join(o3) + " expected 0,4,84");
        o.check(o1c[5] == 2916, "one-point order 5 " + o1c[5].get_str());
        o.check(o2c[5] == 48411, "two-point order 5 " + o2c[5].get_str());
        o.check(std::llround(o3c[5]) == 249156, "three-point order 5 " + std::to_string(std::llround(o3c[5])) + " expected 249156");
        o.check(tr == ints({0, 1, 13, 144, 1539, 16335}), "Bergman split " + join(tr));
        o.check(btr == ints({1, 6, 45, 378, 3402, 32076}), "blob split " + join(btr));
        o.detail << " one-point " << join(o1c) << "; two-point " << join(o2c) << "; three-point enumeration " << join(o3)
                 << ", contour";
        for (double x : o3c) o.detail << " " << std::llround(x);
    });

    criterion(2, "worked examples equal enumerated series at random rational spectra", [](Outcome& o) {
        std::mt19937_64 rng(2024);
        for (int trial = 0; trial < 5; ++trial) {
            auto mu = LoopMeasure<Rational>::from_model(oracle::random_model(rng, 3));
            std::vector<Rational> x;
            while (x.size() < 4) {
                Rational y = oracle::random_rational(rng);
                y.canonicalize();
                if (std::find(x.begin(), x.end(), y) == x.end()) x.push_back(y);
            }
            o.check(correlator<Rational>({{x[0], x[1]}}, 2, mu) == oracle::two_point(x[0], x[1], mu), "two-point");
            o.check(correlator<Rational>({{x[0], x[1], x[2], x[3]}}, 2, mu) == oracle::four_point(x[0], x[1], x[2], x[3], mu),
                    "four-point");
            o.check(correlator<Rational>({{x[0], x[1]}, {x[2], x[3]}}, 2, mu) == oracle::two_two_point(x[0], x[1], x[2], x[3]),
                    "(2+2)-point");
            o.check(free_energy_series<Rational>(0, 2, mu) == oracle::free_energy(mu), "free energy");
        }
        o.detail << " 5 assignments, 4 expansions each";
    });

    criterion(3, "two-point counts are rooted quadrangulation numbers", [](Outcome& o) {
        auto counts = counts_of(counting_series(BoundarySpec::from_lengths({2}), 0, 4));
        for (int v = 0; v <= 4; ++v)
            o.check(counts[static_cast<std::size_t>(v)] == oracle::rooted_quadrangulations(v), "order " + std::to_string(v));
        o.detail << " " << join(counts);
    });

    criterion(4, "creation-operator identity with exact zero residuals", [](Outcome& o) {
        std::mt19937_64 rng(4);
        for (int d = 1; d <= 3; ++d) {
            auto m = cli::random_model(rng, d);
            auto s = cli::suite_propT(m, 2);
            o.check(s.pass, "d=" + std::to_string(d) + " " + s.report.dump());
        }
        o.detail << " d=1,2,3; two-point, (1+1)-point, free energy, four-point; orders <= 2";
    });

    criterion(5, "form polynomials against contour Taylor coefficients, sqrt-odd cancellation", [](Outcome& o) {
        std::mt19937_64 rng(5);
        double worst = 0, worst_odd = 0;
        for (int trial = 0; trial < 3; ++trial) {
            auto m = cli::random_model(rng, 2);
            auto contour = contour_for(m);
            auto o2 = perturbative_vs_exact(m, OmegaTarget::Omega2, {0, 1}, 3, contour);
            auto o3 = perturbative_vs_exact(m, OmegaTarget::Omega3, {0, 1, 1}, 2, contour);
            auto par = omega3_sqrt_parity(m, {0, 1, 1}, 6, 0.7 * std::sqrt(contour.radius));
            worst = std::max({worst, o2.max_rel, o3.max_rel});
            worst_odd = std::max(worst_odd, par.max_odd);
        }
        o.check(worst < 1e-8, "relative error " + sci(worst));
        o.check(worst_odd < 1e-8, "odd coefficient " + sci(worst_odd));
        o.detail << " max relative error " << worst << ", max odd coefficient " << worst_odd;
    });

    criterion(6, "single-value four-point and (2+2)-point series", [](Outcome& o) {
        D1Series s(Rational(1, 2), 5);
        auto fs = d1_fully_simple_series(5, Rational(1, 2));
        o.check(counts_of(s.four_point) == ints({0, 1, 10, 90, 810, 7425}), "four-point " + join(counts_of(s.four_point)));
        o.check(counts_of(s.two_two_point) == ints({0, 0, 6, 108, 1458, 17820}), "(2+2) " + join(counts_of(s.two_two_point)));
        o.check(s.four_point == fs.four_point, "four-point factorial formula");
        o.check(s.two_two_point == fs.two_two_point, "(2+2) factorial formula");
        for (Rational e : {Rational(3, 4), Rational(5, 3)}) {
            D1Series g(e, 5);
            auto f = d1_fully_simple_series(5, e);
            o.check(g.four_point == f.four_point && g.two_two_point == f.two_two_point, "factorial formulas at e=" + e.get_str());
        }
        o.detail << " four-point " << join(counts_of(s.four_point)) << "; (2+2) " << join(counts_of(s.two_two_point));
    });

    criterion(7, "planar free energy intermediates and series", [](Outcome& o) {
        ModelSpec m;
        m.e = {Rational(1, 2)};
        m.r = {Rational(1)};
        m.N = 1;
        m.lambda = 0.01;
        auto p = free_energy_planar(solve_curve(m));
        const double tol = 1e-10;
        o.check(std::abs(p.temperature.at("+eps") + 0.01) < tol, "temperature at +eps");
        o.check(std::abs(p.temperature.at("-eps") - 0.01) < tol, "temperature at -eps");
        double printed_gap = std::abs(p.residue_term.at("-eps") - p.residue_printed);
        double corrected_gap = std::abs(p.residue_term.at("-eps") - p.residue_corrected);
        o.check(printed_gap < tol, "residue term vs displayed closed form, gap " + sci(printed_gap));
        o.check(std::abs(p.tmu_sum - p.tmu_printed) < tol, "temperature-moduli sum");
        auto q = quadrangulation_series(5, true);
        auto f = counts_of(free_energy_closed_series(5, Rational(1, 2)));
        std::vector<Rational> expected = {Rational(0), Rational(1, 2), Rational(9, 8), Rational(9, 2), Rational(189, 8), Rational(729, 5)};
        o.check(f == expected, "vacuum series " + join(f));
        std::vector<Rational> qs;
        for (int v = 0; v <= 5; ++v) qs.push_back(q[v]);
        o.check(qs == expected, "quadrangulation series " + join(qs));
        double exact = eval_series(free_energy_closed_series(16, Rational(1, 2)), 0.01);
        o.check(std::abs(p.graph_series - exact) < tol, "assembled value vs vacuum series");
        double gf = quadrangulation_gf(-0.01, true) - quadrangulation_gf(0.0, true);
        o.check(std::abs(p.graph_series - gf) < tol, "assembled value vs generating function");
        o.detail << " residue term " << p.residue_term.at("-eps") << " (gap to displayed form " << printed_gap
                 << ", to the form with -(lambda rho)^3: " << corrected_gap << "); assembled series value " << p.graph_series;
    });

    criterion(8, "spectral curve solver, Vieta residual, ramification asymptotics", [](Outcome& o) {
        double worst_closed = 0, worst_vieta = 0;
        for (double lam : {0.001, 0.01, 0.1, 1.0}) {
            ModelSpec m;
            m.e = {Rational(1, 2)};
            m.r = {Rational(1)};
            m.N = 1;
            auto c = solve_curve(m, cplx(lam, 0.0));
            auto f = d1_closed_forms(0.5, 1.0, lam);
            worst_closed = std::max({worst_closed, std::abs(c.epsilon()[0] - f.epsilon), std::abs(c.rho()[0] * lam - f.coupling)});
        }
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 4; ++trial) {
            auto m = cli::random_model(rng, 2 + trial % 2);
            for (int j = 1; j <= 20; ++j) worst_vieta = std::max(worst_vieta, solve_curve(m, cplx(0.01 * j, 0.0)).vieta_residual());
        }
        for (auto fam : {CurveFamilySpec::fixed_curve({0.45, 0.82}, {1, 3}, 1e-4, 0.2),
                         CurveFamilySpec::fixed_curve({0.45, 0.82, 1.40}, {1, 3, 2}, 1e-4, 0.2)})
            for (int j = 1; j <= 20; ++j) worst_vieta = std::max(worst_vieta, fam.at(0.01 * j).vieta_residual());
        o.check(worst_closed < 1e-12, "closed form " + sci(worst_closed));
        o.check(worst_vieta < 1e-12, "Vieta " + sci(worst_vieta));
        auto m = reference_model(0.0);
        const double N = m.N.get_d();
        std::vector<double> lams = {1e-3, 1e-4, 1e-5};
        o.detail << " closed-form error " << worst_closed << ", Vieta " << worst_vieta << ", remainder slopes";
        for (int i = 0; i < m.d(); ++i) {
            std::vector<double> rem;
            double e = m.e[static_cast<std::size_t>(i)].get_d(), r = m.r[static_cast<std::size_t>(i)].get_d();
            for (double lam : lams) {
                double shift = 0;
                for (int n = 0; n < m.d(); ++n) shift += m.r[static_cast<std::size_t>(n)].get_d() / (e + m.e[static_cast<std::size_t>(n)].get_d());
                cplx lead(-e - lam / N * shift, std::sqrt(lam * r / N));
                rem.push_back(std::abs(solve_curve(m, cplx(lam, 0.0)).beta()[static_cast<std::size_t>(i)] - lead));
            }
            double slope = std::log(rem[0] / rem[2]) / std::log(lams[0] / lams[2]);
            o.check(std::abs(slope - 1.5) < 0.05, "remainder slope " + sci(slope));
            o.detail << " " << slope;
        }
    });

    criterion(9, "critical coupling of equal-multiplicity pairs", [](Outcome& o) {
        auto s = cli::suite_critical(cli::default_critical_triples());
        o.check(s.pass, s.report.dump());
        double worst = 0, merged = 0;
        for (const auto& t : s.report.at("triples")) {
            worst = std::max(worst, t.at("error").get<double>());
            merged = std::max(merged, t.at("merged_real_part_defect").get<double>());
        }
        o.detail << " max error " << worst << ", merged real part defect " << merged;
    });

    criterion(10, "recursion engine against closed form, involution identity, symmetry", [](Outcome& o) {
        std::mt19937_64 rng(10);
        auto s = cli::suite_btr(reference_model(0.02), 0.02, rng, 20);
        o.check(s.pass, s.report.dump());
        o.detail << " relative error " << s.report.at("max_rel_btr_vs_closed").get<double>() << ", involution residual "
                 << s.report.at("max_involution_residual").get<double>() << ", symmetry defect "
                 << s.report.at("max_symmetry_defect").get<double>();
    });

    criterion(11, "three-point form is continuous across the critical coupling", [](Outcome& o) {
        cplx u(0.3, 0.2), v(0.6, -0.15), z(1.1, 0.3);
        for (auto fam : {CurveFamilySpec::fixed_curve({0.45, 0.82}, {2, 2}, 1e-4, 0.5),
                         CurveFamilySpec::fixed_curve({0.45, 0.82}, {1, 3}, 1e-4, 0.5)}) {
            auto rep = continuity_across_critical(fam, u, v, z);
            o.check(std::abs(rep.slope - 1.0) < 0.05, "slope " + sci(rep.slope));
            for (std::size_t i = 1; i < rep.rows.size(); ++i)
                o.check(rep.rows[i].difference < rep.rows[i - 1].difference, "differences do not shrink");
            o.detail << " lambda_crit " << rep.lambda_crit << " slope " << rep.slope << ";";
        }
    });

    criterion(12, "branch-cut preimage geometry signatures", [](Outcome& o) {
        auto two = CurveFamilySpec::fixed_curve({0.45, 0.82}, {1, 3}, 1e-4, 0.2);
        for (double lam : {0.005, 0.02, 0.04}) {
            auto g = branch_cut_geometry(two.at(lam), 400);
            o.check(g.loops.size() == 2 && g.nesting.empty(), "separate loops at " + std::to_string(lam));
            std::vector<int> enclosed(2, 0);
            for (const auto& loop : g.loops) {
                int inside = 0;
                for (int k = 0; k < 2; ++k)
                    if (loop.winding[static_cast<std::size_t>(k)] != 0) {
                        ++inside;
                        ++enclosed[static_cast<std::size_t>(k)];
                    }
                o.check(inside == 1, "loop encloses one centre");
            }
            o.check(enclosed == std::vector<int>{1, 1}, "each centre enclosed once");
        }
        auto above = branch_cut_geometry(two.at(0.08), 400);
        o.check(above.loops.size() == 2 && above.nesting.size() == 1, "nested loops above the transition");
        auto three = CurveFamilySpec::fixed_curve({0.45, 0.82, 1.40}, {1, 3, 2}, 1e-4, 0.2);
        int changes = 0;
        std::size_t previous = 0;
        std::vector<double> at;
        for (int j = 0; j <= 19; ++j) {
            double lam = 0.01 + 0.01 * j;
            auto g = branch_cut_geometry(three.at(lam), 300);
            o.check(g.loops.size() == 3, "three loops");
            if (j > 0 && g.nesting.size() != previous) {
                ++changes;
                at.push_back(lam);
            }
            previous = g.nesting.size();
        }
        o.check(changes == 2, "nesting changes " + std::to_string(changes));
        o.detail << " d=3 nesting changes " << changes << " (first seen at lambda";
        for (double x : at) o.detail << " " << x;
        o.detail << ")";
    });

    return failures == 0 ? 0 : 1;
}
