#pragma once

#include <qkm/btr.hpp>
#include <qkm/correlators.hpp>
#include <qkm/curve.hpp>
#include <qkm/identities.hpp>

#include <json.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace qkm::cli {

using json = nlohmann::json;

inline json cplx_json(cplx z) { return json::array({z.real(), z.imag()}); }

/// d=2 model with small random rational values and integer multiplicities.
inline ModelSpec random_model(std::mt19937_64& rng, int d = 2) {
    std::uniform_int_distribution<int> num(2, 12), mult(1, 3);
    ModelSpec m;
    std::vector<int> picks;
    while (static_cast<int>(picks.size()) < d) {
        int x = num(rng);
        if (std::find(picks.begin(), picks.end(), x) == picks.end()) picks.push_back(x);
    }
    std::sort(picks.begin(), picks.end());
    Rational N = 0;
    for (int x : picks) {
        m.e.push_back(Rational(x, 8));
        m.r.push_back(Rational(mult(rng)));
        N += m.r.back();
    }
    m.N = N;
    return m;
}

inline json model_json(const ModelSpec& m) {
    json e = json::array(), r = json::array();
    for (const auto& x : m.e) e.push_back(x.get_str());
    for (const auto& x : m.r) r.push_back(x.get_str());
    return {{"e", e}, {"r", r}, {"N", m.N.get_str()}, {"lambda", m.lambda}};
}

struct SuiteResult {
    bool pass = true;
    json report;
};

inline std::vector<std::string> rational_strings(const std::vector<Rational>& v) {
    std::vector<std::string> out;
    for (const auto& x : v) out.push_back(x.get_str());
    return out;
}

/// Creation-operator identity for the standard boundaries at orders <= order.
inline SuiteResult suite_propT(const ModelSpec& m, int order) {
    SuiteResult s;
    s.report["model"] = model_json(m);
    struct Case {
        std::vector<std::vector<int>> classes;
        int q;
    };
    const int last = m.d() - 1;
    std::vector<Case> cases = {{{{0, last}}, 0}, {{{0}, {last}}, last}, {{}, 0}, {{{0, last, last, 0}}, last}};
    for (const auto& c : cases) {
        auto rep = propT_check(m, c.classes, c.q, order);
        s.report["cases"].push_back({{"boundary", rep.boundary},
                                     {"residuals", rational_strings(rep.residual)},
                                     {"loop_terms", rep.loop_terms},
                                     {"insertion_terms", rep.insertion_terms},
                                     {"split_terms", rep.split_terms},
                                     {"exact_zero", rep.exact_zero()}});
        s.pass = s.pass && rep.exact_zero();
    }
    return s;
}

inline json pert_json(const PertExactReport& r) {
    json rows = json::array();
    for (const auto& x : r.rows)
        rows.push_back({{"order", x.order}, {"graph", x.graph}, {"exact", cplx_json(x.exact)}, {"rel_err", x.rel_err}});
    return {{"rows", rows}, {"max_rel", r.max_rel}};
}

/// Omega_2 / Omega_3 polynomial identities against contour-extracted exact coefficients, plus the
/// sqrt(lambda) parity of Omega_3.
inline SuiteResult suite_omega_poly(const ModelSpec& m, const ContourSpec& contour, double tol = 1e-8) {
    SuiteResult s;
    s.report["model"] = model_json(m);
    auto o2 = perturbative_vs_exact(m, OmegaTarget::Omega2, {0, 1}, 3, contour);
    auto o3 = perturbative_vs_exact(m, OmegaTarget::Omega3, {0, 1, 1}, 2, contour);
    auto par = omega3_sqrt_parity(m, {0, 1, 1}, 6, std::sqrt(contour.radius) * 0.7);
    s.report["omega2"] = pert_json(o2);
    s.report["omega3"] = pert_json(o3);
    s.report["omega3_sqrt_odd_max"] = par.max_odd;
    s.report["omega3_sqrt_odd_half_sum"] = par.max_odd_half_sum;
    s.pass = o2.max_rel < tol && o3.max_rel < tol && par.max_odd < tol;
    return s;
}

inline SuiteResult suite_pert_vs_exact(const ModelSpec& m, const ContourSpec& contour, double tol = 1e-8) {
    SuiteResult s;
    s.report["model"] = model_json(m);
    auto o1 = perturbative_vs_exact(m, OmegaTarget::Omega1, {0}, 3, contour);
    auto o1b = perturbative_vs_exact(m, OmegaTarget::Omega1, {m.d() - 1}, 3, contour);
    auto o2 = perturbative_vs_exact(m, OmegaTarget::Omega2, {0, m.d() - 1}, 3, contour);
    s.report["omega1_first"] = pert_json(o1);
    s.report["omega1_last"] = pert_json(o1b);
    s.report["omega2"] = pert_json(o2);
    s.pass = o1.max_rel < tol && o1b.max_rel < tol && o2.max_rel < tol;
    return s;
}

/// Regular sample points away from the real axis singularities of a small-lambda curve.
inline std::vector<std::array<cplx, 3>> regular_points(std::mt19937_64& rng, int count) {
    std::uniform_real_distribution<double> re(0.15, 1.6), im(-0.8, 0.8);
    std::vector<std::array<cplx, 3>> out;
    while (static_cast<int>(out.size()) < count) {
        std::array<cplx, 3> p{cplx(re(rng), im(rng)), cplx(re(rng), im(rng)), cplx(re(rng), im(rng))};
        bool ok = true;
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b)
                if (std::abs(p[a] - p[b]) < 0.15) ok = false;
        if (ok) out.push_back(p);
    }
    return out;
}

/// BTR assembly against the closed form, the involution identity and full symmetry.
inline SuiteResult suite_btr(const ModelSpec& m, double lambda, std::mt19937_64& rng, int points = 20, double tol = 1e-8) {
    SuiteResult s;
    SpectralCurve c = solve_curve(m, cplx(lambda, 0.0));
    s.report["model"] = model_json(m);
    s.report["lambda"] = lambda;
    double max_rel = 0, max_flip = 0, max_sym = 0;
    for (const auto& p : regular_points(rng, points)) {
        cplx ex = omega3_exact(c, p[0], p[1], p[2]);
        cplx bt = omega03_btr(c, p[0], p[1], p[2]);
        max_rel = std::max(max_rel, std::abs(bt - ex) / std::abs(ex));
        auto flip = involution_identity_check(c, p[0], p[1], p[2]);
        max_flip = std::max(max_flip, flip.residual / std::max(1.0, std::abs(flip.lhs)));
        const int perm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        for (const auto& pr : perm) {
            cplx w = omega3_exact(c, p[pr[0]], p[pr[1]], p[pr[2]]);
            max_sym = std::max(max_sym, std::abs(w - ex) / std::abs(ex));
        }
    }
    s.report["max_rel_btr_vs_closed"] = max_rel;
    s.report["max_involution_residual"] = max_flip;
    s.report["max_symmetry_defect"] = max_sym;
    s.pass = max_rel < tol && max_flip < tol && max_sym < tol;
    return s;
}

struct CriticalTriple {
    double eps1, eps2, rho;
};

/// Equal-rho d=2 critical couplings against (eps1-eps2)^2/rho and the merged real part above it.
inline SuiteResult suite_critical(const std::vector<CriticalTriple>& triples, double tol = 1e-8) {
    SuiteResult s;
    for (const auto& t : triples) {
        double expected = (t.eps1 - t.eps2) * (t.eps1 - t.eps2) / t.rho;
        auto fam = CurveFamilySpec::fixed_curve({t.eps1, t.eps2}, {t.rho, t.rho}, 1e-6, 4 * expected);
        auto crit = critical_lambda(fam);
        SpectralCurve above = fam.at(crit.lambda * 1.5);
        double merged = 0;
        int upper = static_cast<int>(above.beta().size()) / 2;
        for (int i = 0; i < upper; ++i)
            merged = std::max(merged, std::abs(above.beta()[static_cast<std::size_t>(i)].real() + 0.5 * (t.eps1 + t.eps2)));
        bool ok = std::abs(crit.lambda - expected) < tol && merged < 1e-10;
        s.report["triples"].push_back({{"eps", {t.eps1, t.eps2}},
                                       {"rho", t.rho},
                                       {"lambda_crit", crit.lambda},
                                       {"expected", expected},
                                       {"error", std::abs(crit.lambda - expected)},
                                       {"merged_real_part_defect", merged},
                                       {"pass", ok}});
        s.pass = s.pass && ok;
    }
    return s;
}

inline const std::vector<CriticalTriple>& default_critical_triples() {
    static const std::vector<CriticalTriple> t = {{0.45, 0.82, 2.0}, {0.3, 0.7, 1.0}, {0.5, 1.2, 3.0}};
    return t;
}

}  // namespace qkm::cli
