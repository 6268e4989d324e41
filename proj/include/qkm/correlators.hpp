#pragma once

#include <qkm/contour.hpp>
#include <qkm/curve.hpp>
#include <qkm/multidual.hpp>
#include <qkm/rational.hpp>
#include <qkm/series.hpp>

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkm {

namespace detail {
inline double curve_scale(const SpectralCurve& c) {
    double s = 1.0;
    for (auto e : c.epsilon()) s = std::max(s, std::abs(e));
    return s;
}
}  // namespace detail

/// e_k = R(eps_k) and r_k = rho_k R'(eps_k) recovered from the curve (valid in both family modes).
inline std::vector<cplx> curve_e(const SpectralCurve& c) {
    std::vector<cplx> out;
    for (auto x : c.epsilon()) out.push_back(c.R(x));
    return out;
}
inline std::vector<cplx> curve_r(const SpectralCurve& c) {
    std::vector<cplx> out;
    for (int k = 0; k < c.d(); ++k) out.push_back(c.rho()[static_cast<std::size_t>(k)] * c.Rp(c.epsilon()[static_cast<std::size_t>(k)]));
    return out;
}

/// Planar 1-point function pulled back to the z-plane. Uses the lambda-free form
/// (1/N) sum_k [rho_k/(eps_k+z) + rho_k/(eps_k-z) - r_k/(e_k - R(z))]; the pole at z = eps_q cancels
/// and is replaced by its limit -r_q R''/(2 R'^2) when z sits on it.
inline cplx omega1_exact(const SpectralCurve& c, cplx z) {
    const double confluent_tol = 1e-9 * detail::curve_scale(c);
    auto e = curve_e(c);
    auto r = curve_r(c);
    cplx Rz = c.R(z);
    cplx acc{};
    for (int k = 0; k < c.d(); ++k) {
        cplx ek = c.epsilon()[static_cast<std::size_t>(k)], rk = c.rho()[static_cast<std::size_t>(k)];
        acc += rk / (ek + z);
        if (std::abs(z - ek) < confluent_tol) {
            cplx rp = c.Rp(ek);
            acc += -r[static_cast<std::size_t>(k)] * c.Rpp(ek) / (2.0 * rp * rp);
        } else {
            acc += rk / (ek - z) - r[static_cast<std::size_t>(k)] / (e[static_cast<std::size_t>(k)] - Rz);
        }
    }
    return acc / c.N();
}

inline cplx omega2_exact(const SpectralCurve& c, cplx u, cplx z) {
    double scale = detail::curve_scale(c);
    if (std::abs(u - z) < 1e-14 * scale || std::abs(u + z) < 1e-14 * scale) throw std::domain_error("pole of Omega02");
    return (1.0 / ((u - z) * (u - z)) + 1.0 / ((u + z) * (u + z))) / (c.Rp(u) * c.Rp(z));
}

/// The bracket whose mixed third derivative gives Omega_3, for any scalar built on complex values.
/// `betas` restricts the ramification sum (all of them when null); `antidiagonal` toggles the
/// two terms with poles at z = -u and z = -v.
template <class S>
S omega3_bracket(const SpectralCurve& c, const S& u, const S& v, const S& z, const std::vector<cplx>* betas = nullptr,
                 bool antidiagonal = true) {
    const S lam(c.lambda());
    S out(0.0);
    if (antidiagonal)
        out = lam * (S(1.0) / (v + u) + S(1.0) / (v - u)) * c.inv_Rp(-u) / (c.Rp(u) * (z + u)) +
              lam * (S(1.0) / (u + v) + S(1.0) / (u - v)) * c.inv_Rp(-v) / (c.Rp(v) * (z + v));
    for (auto b : betas ? *betas : c.beta()) {
        S sb(b);
        cplx denom = c.Rp(-b) * c.Rpp(b);
        out += lam * (S(1.0) / (v + sb) + S(1.0) / (v - sb)) * (S(1.0) / (u + sb) + S(1.0) / (u - sb)) / (S(denom) * (z - sb));
    }
    return out;
}

/// Planar 3-point function: mixed derivative d^3/du dv dz of the bracket by multi-dual
/// arithmetic, divided by R'(u)R'(v)R'(z).
inline cplx omega3_exact(const SpectralCurve& c, cplx u, cplx v, cplx z, const std::vector<cplx>* betas = nullptr,
                         bool antidiagonal = true) {
    using MD = MultiDual<cplx, 3, 3>;
    double scale = detail::curve_scale(c);
    auto close = [&](cplx a, cplx b) { return std::abs(a - b) < 1e-12 * scale; };
    if (close(u, v) || close(u, -v) || close(z, -u) || close(z, -v)) throw std::domain_error("pole of Omega03 bracket");
    for (auto b : c.beta())
        if (close(u, b) || close(u, -b) || close(v, b) || close(v, -b) || close(z, b))
            throw std::domain_error("pole of Omega03 bracket at a ramification point");
    MD U = MD::variable(u, 0), V = MD::variable(v, 1), Z = MD::variable(z, 2);
    MD br = omega3_bracket(c, U, V, Z, betas, antidiagonal);
    return br.derivative({1, 1, 1}) / (c.Rp(u) * c.Rp(v) * c.Rp(z));
}

/// Value at a point where arguments may coincide: the symmetric functions are analytic there, so
/// the value is the mean of f(u + t, v + a t, z + b t) over a small circle in t.
template <class F>
cplx coincident_mean(F&& f, double radius = 1e-2, int nodes = 64) {
    ContourSpec spec{cplx{}, radius, nodes};
    return contour_mean(f, spec);
}

inline cplx omega2_coincident(const SpectralCurve& c, cplx u, cplx z, double radius = 1e-2) {
    // subtracts the diagonal double pole 1/(R(u)-R(z))^2 before averaging
    return coincident_mean(
        [&](cplx t) {
            cplx a = u + t, b = z - 0.7 * t;
            cplx dR = c.R(a) - c.R(b);
            return omega2_exact(c, a, b) - 1.0 / (dR * dR);
        },
        radius);
}

inline cplx omega3_coincident(const SpectralCurve& c, cplx u, cplx v, cplx z, double radius = 1e-2) {
    return coincident_mean(
        [&](cplx t) { return omega3_exact(c, u + t, v + cplx(0.31, 0.77) * t, z + cplx(-0.64, 0.45) * t); }, radius);
}

struct ConfluentSplit {
    cplx tr;    ///< confluent limit of 1/(R'(u)R'(z)(u-z)^2) - 1/(R(u)-R(z))^2
    cplx blob;  ///< 1/(R'(p)^2 (2p)^2)
};

/// Confluent diagonal split of Omega_2 at a single point p. The Bergman part reduces to
/// -S(R)(p)/(6 R'(p)^2) with S the Schwarzian derivative.
inline ConfluentSplit omega2_confluent_split(const SpectralCurve& c, cplx p) {
    auto v = c.eval(p, 3);
    if (std::abs(v[1]) < 1e-13) throw std::domain_error("at ramification");
    cplx schwarzian = v[3] / v[1] - 1.5 * (v[2] / v[1]) * (v[2] / v[1]);
    return {-schwarzian / (6.0 * v[1] * v[1]), 1.0 / (v[1] * v[1] * 4.0 * p * p)};
}

/// Point evaluator for one of the exact forms.
struct OmegaForm {
    enum class Kind { Omega1, Omega2, Omega3, omega01 };
    Kind kind;
    const SpectralCurve* curve;

    int arity() const { return kind == Kind::Omega2 ? 2 : kind == Kind::Omega3 ? 3 : 1; }
    cplx operator()(const std::vector<cplx>& z) const {
        if (static_cast<int>(z.size()) != arity()) throw std::invalid_argument("wrong number of arguments for form");
        switch (kind) {
            case Kind::Omega1: return omega1_exact(*curve, z[0]);
            case Kind::Omega2: return omega2_exact(*curve, z[0], z[1]);
            case Kind::Omega3: return omega3_exact(*curve, z[0], z[1], z[2]);
            case Kind::omega01: return -curve->R(-z[0]) * curve->Rp(z[0]);
        }
        throw std::logic_error("unknown form");
    }
};

// ---------------------------------------------------------------- d = 1 closed forms

/// Exact lambda-series of the d=1 curve and its correlators at rational e (N drops out).
struct D1Series {
    Series<Rational> root;        ///< sqrt(4e^2 + 12 lambda)
    Series<Rational> eps;         ///< (4e + root)/6
    Series<Rational> eps_hat;     ///< -(2e + 2 root)/6
    Series<Rational> coupling;    ///< lambda rho / N
    Series<Rational> two_point;
    Series<Rational> four_point;
    Series<Rational> two_two_point;
    Series<Rational> omega2_tr;
    Series<Rational> omega2_blob;

    D1Series(const Rational& e, int order) {
        if (e <= 0) throw std::invalid_argument("e must be positive");
        Series<Rational> arg = Series<Rational>::linear(4 * e * e, Rational(12), order);
        root = arg.sqrt_with_root(2 * e);
        eps = (root + Rational(4 * e)) / Rational(6);
        eps_hat = -(root * Rational(2) + Rational(2 * e)) / Rational(6);
        Series<Rational> lam = Series<Rational>::linear(0, 1, order);
        coupling = (root * Rational(2 * e) - Rational(4 * e * e) + lam * Rational(12)) / Rational(18);
        Series<Rational> diff = eps - eps_hat;
        two_point = eps_hat * Rational(-2) / (diff * diff);
        Series<Rational> s2e = root + Rational(2 * e);
        four_point = (root * Rational(12) + Rational(8 * e)) / pow(s2e, 3) - two_point * two_point * Rational(2);
        Series<Rational> half = root / Rational(2) + Rational(e);
        two_two_point = lam * lam * Rational(6) / pow(half, 6);
        // R', R'', R''' at eps
        Series<Rational> w = eps * Rational(2);
        Series<Rational> Rp = Series<Rational>::constant(1, order) + coupling / (w * w);
        Series<Rational> Rpp = coupling * Rational(-2) / pow(w, 3);
        Series<Rational> Rppp = coupling * Rational(6) / pow(w, 4);
        Series<Rational> ratio = Rpp / Rp;
        Series<Rational> schwarzian = Rppp / Rp - ratio * ratio * Rational(3, 2);
        omega2_tr = -schwarzian / (Rp * Rp * Rational(6));
        omega2_blob = Series<Rational>::constant(1, order) / (Rp * Rp * w * w);
    }
};

/// Integer counts from a d=1, e=1/2 series: coefficient of (-lambda)^v.
inline std::vector<Rational> counts_of(const Series<Rational>& s) {
    std::vector<Rational> out;
    for (int v = 0; v <= s.order(); ++v) out.push_back(v % 2 ? Rational(-s[v]) : s[v]);
    return out;
}

struct D1ClosedForms {
    double epsilon, epsilon_hat, coupling;
    double two_point, four_point, two_two_point;
};

inline D1ClosedForms d1_closed_forms(double e, double N, double lambda) {
    if (!(e > 0) || !(N > 0)) throw std::invalid_argument("e and N must be positive");
    double disc = 4 * e * e + 12 * lambda;
    if (disc < 0) throw std::domain_error("outside real phase");
    double s = std::sqrt(disc);
    D1ClosedForms f{};
    f.epsilon = (4 * e + s) / 6;
    f.epsilon_hat = -(2 * e + 2 * s) / 6;
    f.coupling = (2 * e * s - 4 * e * e + 12 * lambda) / 18;
    double diff = f.epsilon - f.epsilon_hat;
    f.two_point = -2 * f.epsilon_hat / (diff * diff);
    f.four_point = (8 * e + 12 * s) / std::pow(2 * e + s, 3) - 2 * f.two_point * f.two_point;
    f.two_two_point = 6 * lambda * lambda / std::pow(e + s / 2, 6);
    return f;
}

namespace detail {
inline Rational factorial(int n) {
    mpz_class f = 1;
    for (int k = 2; k <= n; ++k) f *= k;
    return Rational(f);
}
inline Rational pow3(int k) { return k >= 0 ? pow(Rational(3), k) : Rational(1) / pow(Rational(3), -k); }
}  // namespace detail

/// Factorial-formula series for the d=1 (2+2)-point and 4-point functions, as lambda-series at e.
struct FullySimpleSeries {
    Series<Rational> two_two_point;
    Series<Rational> four_point;
};

inline FullySimpleSeries d1_fully_simple_series(int order, const Rational& e) {
    FullySimpleSeries out{Series<Rational>(order), Series<Rational>(order)};
    Rational two_e = 2 * e;
    for (int m = 0; m + 2 <= order; ++m) {
        Rational c = 36 * detail::pow3(m) * detail::factorial(5 + 2 * m) / (detail::factorial(m) * detail::factorial(6 + m));
        out.two_two_point[m + 2] = ((m + 2) % 2 ? Rational(-c) : c) / pow(two_e, 2 * m + 6);
    }
    for (int m = 0; m + 1 <= order; ++m) {
        Rational c = 60 * detail::pow3(m - 1) * detail::factorial(3 + 2 * m) / (detail::factorial(m) * detail::factorial(5 + m));
        out.four_point[m + 1] = ((m + 1) % 2 ? Rational(-c) : c) / pow(two_e, 2 * m + 4);
    }
    return out;
}

// ---------------------------------------------------------------- planar free energy, d = 1

/// Coefficient c_n = 3^n (2n-1)! / (n! (n+2)!) of (-lambda)^n/(2e)^(2n) in the planar vacuum series.
inline Rational free_energy_coefficient(int n) {
    if (n < 1) throw std::invalid_argument("free energy coefficients start at n = 1");
    return detail::pow3(n) * detail::factorial(2 * n - 1) / (detail::factorial(n) * detail::factorial(n + 2));
}

/// sum_{n=1}^{order} c_n (-lambda)^n / (2e)^(2n) as a lambda-series.
inline Series<Rational> free_energy_closed_series(int order, const Rational& e) {
    Series<Rational> s(order);
    for (int n = 1; n <= order; ++n) {
        Rational c = free_energy_coefficient(n) / pow(Rational(2 * e), 2 * n);
        s[n] = n % 2 ? Rational(-c) : c;
    }
    return s;
}

struct FreeEnergyParts {
    double lambda = 0, e = 0, epsilon = 0, coupling = 0;  ///< coupling = lambda rho / N
    std::map<std::string, double> temperature;            ///< keys "+eps", "-eps", "inf"
    std::map<std::string, double> residue_term;           ///< Res omega01 V_a per pole
    std::map<std::string, double> mu;                     ///< mu_a for the finite poles
    double tmu_sum = 0;
    double compensator = 0;
    double assembled = 0;        ///< 1/2 sum_a [Res omega01 V_a + t_a mu_a] + compensator
    double graph_series = 0;     ///< vacuum-graph series value extracted from the assembled value
    // closed-form references for the intermediates
    double residue_printed = 0;    ///< (L/16 eps^4)(16 eps^6 - 4 eps^4 L + L^3)
    double residue_corrected = 0;  ///< same with -L^3
    double tmu_printed = 0;
};

/// Assembles the planar free energy of a d=1 curve from residues of omega01 = -R(-z)R'(z).
/// Local variable at eps is 1/(R - e); at the poles of R' it is R itself, which makes the
/// potentials V polynomial in it and the mu_a finite.
inline FreeEnergyParts free_energy_planar(const SpectralCurve& c) {
    if (c.d() != 1) throw std::domain_error("free energy assembly is restricted to d=1");
    if (std::abs(c.lambda().imag()) > 0) throw std::domain_error("free energy needs real lambda");
    const double lam = c.lambda().real();
    if (lam == 0.0) throw std::domain_error("free energy assembly needs lambda != 0");
    const cplx E = c.epsilon()[0];
    if (std::abs(E.imag()) > 1e-12 || std::abs(c.rho()[0].imag()) > 1e-12) throw std::domain_error("outside real phase");
    const double N = c.N();
    const cplx e = c.R(E);
    const cplx r = c.rho()[0] * c.Rp(E);
    FreeEnergyParts p;
    p.lambda = lam;
    p.e = e.real();
    p.epsilon = E.real();
    p.coupling = (c.coupling() * c.rho()[0]).real();
    auto w01 = [&](cplx z) { return -c.R(-z) * c.Rp(z); };
    double rad = 0.25 * E.real();
    p.temperature["+eps"] = contour_residue(w01, ContourSpec{E, rad, 256}).real();
    p.temperature["-eps"] = contour_residue(w01, ContourSpec{-E, rad, 256}).real();
    // every finite singularity sits at +-eps; a circle of radius 4 eps keeps rounding noise small
    double big = 4.0 * std::abs(E);
    p.temperature["inf"] = -contour_residue(w01, ContourSpec{0.0, big, 256}).real();
    auto V_minus = [&](cplx z) { return -e * c.R(z); };
    auto V_inf = [&](cplx z) {
        cplx Rz = c.R(z);
        return 0.5 * Rz * Rz;
    };
    p.residue_term["+eps"] = 0.0;
    p.residue_term["-eps"] = contour_residue([&](cplx z) { return w01(z) * V_minus(z); }, ContourSpec{-E, rad, 256}).real();
    p.residue_term["inf"] = -contour_residue([&](cplx z) { return w01(z) * V_inf(z); }, ContourSpec{0.0, big, 256}).real();
    // primitive of omega01 without its logarithms; the logs are merged into the regular combinations below
    const cplx a = c.coupling() * r;  // lambda r / N
    auto phi0 = [&](cplx z) { return 0.5 * z * z + a * e / (c.Rp(E) * (z + E)); };
    auto log_ratio = [&](cplx z) { return (z + E) / (z - E); };
    // mu_{+eps} = lim [ -t log(R - e) - Phi ]  with t = -a
    auto g_plus = [&](cplx z) { return -phi0(z) - a * std::log((c.R(z) - e) * log_ratio(z)); };
    // mu_{-eps} = lim [ V(z) - t log R(z) - Phi ]  with t = +a
    auto g_minus = [&](cplx z) { return V_minus(z) - phi0(z) - a * std::log(c.R(z) * log_ratio(z)); };
    double mrad = 1e-3 * E.real();
    p.mu["+eps"] = contour_mean(g_plus, ContourSpec{E, mrad, 64}).real();
    p.mu["-eps"] = contour_mean(g_minus, ContourSpec{-E, mrad, 64}).real();
    p.tmu_sum = p.temperature["+eps"] * p.mu["+eps"] + p.temperature["-eps"] * p.mu["-eps"];
    p.compensator = -(lam / (2 * N)) * r.real() * p.e * p.e;
    double res_sum = p.residue_term["+eps"] + p.residue_term["-eps"] + p.residue_term["inf"];
    p.assembled = 0.5 * (res_sum + p.tmu_sum) + p.compensator;
    const double ee = p.e;
    p.graph_series = (lam * ee * ee / 2 + (lam * lam / 4) * (3 + std::log(16 * std::pow(ee, 4) / (lam * lam))) - p.assembled) /
                     (2 * lam * lam);
    const double L = p.coupling, eps = p.epsilon;
    p.residue_printed = L / (16 * std::pow(eps, 4)) * (16 * std::pow(eps, 6) - 4 * std::pow(eps, 4) * L + L * L * L);
    p.residue_corrected = L / (16 * std::pow(eps, 4)) * (16 * std::pow(eps, 6) - 4 * std::pow(eps, 4) * L - L * L * L);
    p.tmu_printed = lam * (eps * eps - L * L / (4 * eps * eps) + lam * std::log(1 + 4 * eps * eps / L));
    return p;
}

/// Generating function of non-rooted quadrangulations. The printed form carries -log(1+s)/4;
/// the corrected form carries -log(1+s)/2, whose Taylor series reproduces the vacuum-graph series.
inline double quadrangulation_gf(double lambda, bool corrected = false) {
    if (lambda > 1.0 / 12.0) throw std::domain_error("quadrangulation generating function: lambda above branch point 1/12");
    double s = std::sqrt(1 - 12 * lambda);
    double l = std::log(1 + s);
    return 1.0 / (6 * (1 + s) * (1 + s)) - 5.0 / (6 * (1 + s)) + 3.0 / 8 - (corrected ? l / 2 : l / 4);
}

/// Exact Taylor series of the quadrangulation generating function minus its value at 0.
inline Series<Rational> quadrangulation_series(int order, bool corrected = false) {
    Series<Rational> x = Series<Rational>::linear(0, 1, order);
    Series<Rational> s = (Series<Rational>::constant(1, order) - x * Rational(12)).sqrt_with_root(1);
    Series<Rational> one_s = s + Rational(1);
    Series<Rational> q = Series<Rational>::constant(1, order) / (one_s * one_s * Rational(6)) -
                         Series<Rational>::constant(Rational(5, 6), order) / one_s;
    // log(1+s) - log 2 = log(1 + u), u = (s-1)/2
    Series<Rational> u = (s - Rational(1)) / Rational(2);
    Series<Rational> lg(order), up = u;
    for (int k = 1; k <= order; ++k) {
        lg += up * Rational(k % 2 ? 1 : -1, k);
        up *= u;
    }
    q -= lg * (corrected ? Rational(1, 2) : Rational(1, 4));
    q[0] = 0;
    return q;
}

}  // namespace qkm
