#pragma once

#include <qkm/contour.hpp>
#include <qkm/model.hpp>
#include <qkm/polyroots.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkm {

class ContinuationError : public std::runtime_error {
public:
    ContinuationError(cplx failed_at, cplx last_good)
        : std::runtime_error(message(failed_at, last_good)), failed_at_(failed_at), last_good_(last_good) {}
    cplx failed_at() const { return failed_at_; }
    cplx last_good() const { return last_good_; }

private:
    static std::string message(cplx at, cplx good) {
        std::ostringstream os;
        os.precision(12);
        os << "continuation failed at lambda=" << at.real() << (at.imag() < 0 ? "" : "+") << at.imag()
           << "i (last good lambda=" << good.real() << (good.imag() < 0 ? "" : "+") << good.imag() << "i)";
        return os.str();
    }
    cplx failed_at_, last_good_;
};

/// The rational covering R(z) = z - (lambda/N) sum_k rho_k/(eps_k + z) together with its
/// ramification points. Immutable once built.
class SpectralCurve {
public:
    SpectralCurve(std::vector<cplx> epsilon, std::vector<cplx> rho, double N, cplx lambda)
        : eps_(std::move(epsilon)), rho_(std::move(rho)), N_(N), lambda_(lambda) {
        if (eps_.empty() || eps_.size() != rho_.size()) throw std::invalid_argument("curve needs matching eps and rho");
        if (!(N_ > 0)) throw std::invalid_argument("N must be positive");
        compute_ramification();
    }

    int d() const { return static_cast<int>(eps_.size()); }
    const std::vector<cplx>& epsilon() const { return eps_; }
    const std::vector<cplx>& rho() const { return rho_; }
    double N() const { return N_; }
    cplx lambda() const { return lambda_; }
    cplx coupling() const { return lambda_ / N_; }
    /// beta[i] and beta[i+d] are conjugate partners when the curve is real.
    const std::vector<cplx>& beta() const { return beta_; }
    const std::optional<ModelSpec>& model() const { return model_; }
    void set_model(const ModelSpec& m) { model_ = m; }

    /// R evaluated for any scalar type built on complex numbers (e.g. multi-duals).
    template <class S>
    S R(const S& z) const {
        S acc(0.0);
        for (int k = 0; k < d(); ++k) acc += S(rho_[static_cast<std::size_t>(k)]) / (S(eps_[static_cast<std::size_t>(k)]) + z);
        return z - S(coupling()) * acc;
    }
    template <class S>
    S Rp(const S& z) const {
        S acc(0.0);
        for (int k = 0; k < d(); ++k) {
            S w = S(eps_[static_cast<std::size_t>(k)]) + z;
            acc += S(rho_[static_cast<std::size_t>(k)]) / (w * w);
        }
        return S(1.0) + S(coupling()) * acc;
    }
    /// 1/R'(z) as a ratio of polynomials, so it stays finite (zero) at the poles z = -eps_k.
    template <class S>
    S inv_Rp(const S& z) const {
        S all(1.0), acc(0.0);
        for (int k = 0; k < d(); ++k) {
            S w = S(eps_[static_cast<std::size_t>(k)]) + z;
            S others(1.0);
            for (int j = 0; j < d(); ++j) {
                if (j == k) continue;
                S x = S(eps_[static_cast<std::size_t>(j)]) + z;
                others *= x * x;
            }
            all *= w * w;
            acc += S(rho_[static_cast<std::size_t>(k)]) * others;
        }
        return all / (all + S(coupling()) * acc);
    }

    /// R, R', R'', R''' at z (entries beyond deriv_order are left zero).
    std::array<cplx, 4> eval(cplx z, int deriv_order = 3) const {
        if (deriv_order < 0 || deriv_order > 3) throw std::invalid_argument("derivative order must be 0..3");
        std::array<cplx, 4> out{z, 1.0, 0.0, 0.0};
        for (int k = 0; k < d(); ++k) {
            cplx w = eps_[static_cast<std::size_t>(k)] + z;
            if (std::abs(w) < 1e-300) throw std::domain_error("evaluation at pole -eps_" + std::to_string(k + 1));
            cplx t = coupling() * rho_[static_cast<std::size_t>(k)] / w;
            out[0] -= t;
            if (deriv_order >= 1) out[1] += t / w;
            if (deriv_order >= 2) out[2] -= 2.0 * t / (w * w);
            if (deriv_order >= 3) out[3] += 6.0 * t / (w * w * w);
        }
        for (int j = deriv_order + 1; j < 4; ++j) out[static_cast<std::size_t>(j)] = 0.0;
        return out;
    }
    cplx R(cplx z) const { return eval(z, 0)[0]; }
    cplx Rp(cplx z) const { return eval(z, 1)[1]; }
    cplx Rpp(cplx z) const { return eval(z, 2)[2]; }
    cplx Rppp(cplx z) const { return eval(z, 3)[3]; }

    /// |sum beta + 2 sum eps|
    double vieta_residual() const {
        cplx s{};
        for (auto b : beta_) s += b;
        for (auto e : eps_) s += 2.0 * e;
        return std::abs(s);
    }

    /// Roots of R(z) = zeta; spurious roots at poles are dropped (only happens at lambda = 0).
    std::vector<cplx> preimages(cplx zeta) const {
        // (z - zeta) prod (eps_k + z) - c sum_k rho_k prod_{j != k}(eps_j + z)
        Poly p{-zeta, 1.0};
        for (auto e : eps_) p = poly_mul(p, Poly{e, 1.0});
        for (int k = 0; k < d(); ++k) {
            Poly q{coupling() * rho_[static_cast<std::size_t>(k)]};
            for (int j = 0; j < d(); ++j)
                if (j != k) q = poly_mul(q, Poly{eps_[static_cast<std::size_t>(j)], 1.0});
            p = poly_add(p, poly_scale(q, -1.0));
        }
        auto roots = polynomial_roots(p);
        std::vector<cplx> out;
        for (auto z : roots) {
            bool at_pole = false;
            for (auto e : eps_)
                if (std::abs(e + z) < 1e-10 * std::max(1.0, std::abs(e))) at_pole = true;
            if (at_pole) continue;
            out.push_back(polish_preimage(z, zeta));
        }
        return out;
    }

    /// The local Galois involution at beta[i]: the other preimage of R(q) that tends to beta[i].
    cplx galois_involution(int i, cplx q) const {
        cplx b = beta_.at(static_cast<std::size_t>(i));
        double scale = std::max(1.0, std::abs(b));
        if (std::abs(q - b) < 1e-14 * scale) return b;
        auto pre = preimages(R(q));
        if (pre.size() < 2) throw std::domain_error("involution needs at least two preimages");
        auto self = std::min_element(pre.begin(), pre.end(), [&](cplx a, cplx c) { return std::abs(a - q) < std::abs(c - q); });
        pre.erase(self);
        cplx predicted = 2.0 * b - q;
        std::sort(pre.begin(), pre.end(), [&](cplx a, cplx c) { return std::abs(a - predicted) < std::abs(c - predicted); });
        if (pre.size() >= 2) {
            double d0 = std::abs(pre[0] - predicted), d1 = std::abs(pre[1] - predicted);
            if (d1 - d0 < 1e-9 * std::max(d1, 1e-300)) {
                std::ostringstream os;
                os << "involution selection ambiguous at q=" << q;
                throw std::domain_error(os.str());
            }
        }
        return pre[0];
    }

private:
    cplx polish_preimage(cplx z, cplx zeta) const {
        for (int k = 0; k < 4; ++k) {
            auto v = eval(z, 1);
            if (v[1] == cplx{}) break;
            cplx nz = z - (v[0] - zeta) / v[1];
            if (!(std::abs(R(nz) - zeta) < std::abs(v[0] - zeta))) break;
            z = nz;
        }
        return z;
    }

    void compute_ramification() {
        // numerator of R'(z): prod (eps_k+z)^2 + c sum_k rho_k prod_{j != k}(eps_j+z)^2
        Poly p{1.0};
        for (auto e : eps_) p = poly_mul(p, poly_mul(Poly{e, 1.0}, Poly{e, 1.0}));
        for (int k = 0; k < d(); ++k) {
            Poly q{coupling() * rho_[static_cast<std::size_t>(k)]};
            for (int j = 0; j < d(); ++j)
                if (j != k) {
                    cplx e = eps_[static_cast<std::size_t>(j)];
                    q = poly_mul(q, poly_mul(Poly{e, 1.0}, Poly{e, 1.0}));
                }
            p = poly_add(p, q);
        }
        auto roots = polynomial_roots(p);
        if (lambda_ != cplx{}) {
            for (auto& z : roots) {
                for (int it = 0; it < 4; ++it) {
                    auto v = eval(z, 2);
                    if (v[2] == cplx{}) break;
                    cplx nz = z - v[1] / v[2];
                    if (!(std::abs(Rp(nz)) < std::abs(v[1]))) break;
                    z = nz;
                }
            }
        }
        beta_ = order_ramification(roots);
    }

    /// Upper half-plane roots first (by decreasing real part, i.e. following -e_1, -e_2, ...),
    /// then their partners in the same order. Falls back to a plain sort for non-real curves.
    std::vector<cplx> order_ramification(std::vector<cplx> roots) const {
        const std::size_t n = roots.size();
        std::vector<cplx> upper, lower;
        for (auto z : roots) (z.imag() >= 0 ? upper : lower).push_back(z);
        auto by_real = [](cplx a, cplx b) { return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag(); };
        if (upper.size() != lower.size()) {
            std::sort(roots.begin(), roots.end(), by_real);
            return roots;
        }
        std::sort(upper.begin(), upper.end(), by_real);
        std::vector<cplx> out = upper;
        std::vector<char> used(lower.size(), 0);
        for (auto z : upper) {
            std::size_t best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < lower.size(); ++j)
                if (!used[j] && std::abs(lower[j] - std::conj(z)) < bd) {
                    bd = std::abs(lower[j] - std::conj(z));
                    best = j;
                }
            used[best] = 1;
            out.push_back(lower[best]);
        }
        (void)n;
        return out;
    }

    std::vector<cplx> eps_, rho_;
    double N_;
    cplx lambda_;
    std::vector<cplx> beta_;
    std::optional<ModelSpec> model_;
};

struct SolveOptions {
    double tolerance = 1e-13;  ///< relative residual
    int max_newton = 30;
    int max_halvings = 40;
    double initial_step = 0.125;  ///< fraction of the path from 0 to lambda
};

namespace detail {

struct CurveUnknowns {
    std::vector<cplx> eps, rho;
};

inline double curve_residual(const CurveUnknowns& x, const std::vector<double>& e, const std::vector<double>& r, cplx c,
                             Eigen::VectorXcd* F = nullptr) {
    const int d = static_cast<int>(e.size());
    double worst = 0.0;
    if (F) F->resize(2 * d);
    for (int k = 0; k < d; ++k) {
        cplx Rk = x.eps[static_cast<std::size_t>(k)], Rpk = 1.0;
        for (int m = 0; m < d; ++m) {
            cplx w = x.eps[static_cast<std::size_t>(m)] + x.eps[static_cast<std::size_t>(k)];
            Rk -= c * x.rho[static_cast<std::size_t>(m)] / w;
            Rpk += c * x.rho[static_cast<std::size_t>(m)] / (w * w);
        }
        cplx f = Rk - e[static_cast<std::size_t>(k)];
        cplx g = x.rho[static_cast<std::size_t>(k)] * Rpk - r[static_cast<std::size_t>(k)];
        if (F) {
            (*F)(k) = f;
            (*F)(d + k) = g;
        }
        worst = std::max({worst, std::abs(f) / std::max(1.0, e[static_cast<std::size_t>(k)]),
                          std::abs(g) / std::max(1.0, r[static_cast<std::size_t>(k)])});
    }
    return worst;
}

inline Eigen::MatrixXcd curve_jacobian(const CurveUnknowns& x, cplx c) {
    const int d = static_cast<int>(x.eps.size());
    Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(2 * d, 2 * d);
    for (int k = 0; k < d; ++k) {
        cplx ek = x.eps[static_cast<std::size_t>(k)], rk = x.rho[static_cast<std::size_t>(k)];
        cplx Rp = 1.0, Rpp = 0.0;
        for (int m = 0; m < d; ++m) {
            cplx w = x.eps[static_cast<std::size_t>(m)] + ek;
            Rp += c * x.rho[static_cast<std::size_t>(m)] / (w * w);
            Rpp -= 2.0 * c * x.rho[static_cast<std::size_t>(m)] / (w * w * w);
        }
        for (int m = 0; m < d; ++m) {
            cplx em = x.eps[static_cast<std::size_t>(m)], rm = x.rho[static_cast<std::size_t>(m)];
            cplx w = em + ek;
            J(k, m) = c * rm / (w * w) + (m == k ? Rp : cplx{});
            J(k, d + m) = -c / w;
            J(d + k, d + m) = rk * c / (w * w) + (m == k ? Rp : cplx{});
            J(d + k, m) = rk * ((m == k ? Rpp : cplx{}) - 2.0 * c * rm / (w * w * w));
        }
    }
    return J;
}

inline bool newton_curve(CurveUnknowns& x, const std::vector<double>& e, const std::vector<double>& r, cplx c,
                         const SolveOptions& opt) {
    const int d = static_cast<int>(e.size());
    Eigen::VectorXcd F;
    double res = curve_residual(x, e, r, c, &F);
    for (int it = 0; it < opt.max_newton; ++it) {
        if (res < opt.tolerance) return true;
        Eigen::MatrixXcd J = curve_jacobian(x, c);
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(J);
        Eigen::VectorXcd dx = lu.solve(-F);
        if (!dx.allFinite()) return false;
        CurveUnknowns trial = x;
        for (int k = 0; k < d; ++k) {
            trial.eps[static_cast<std::size_t>(k)] += dx(k);
            trial.rho[static_cast<std::size_t>(k)] += dx(d + k);
        }
        Eigen::VectorXcd Ft;
        double rt = curve_residual(trial, e, r, c, &Ft);
        if (!std::isfinite(rt) || rt > 10.0 * res + 1e-8) return false;
        x = std::move(trial);
        F = std::move(Ft);
        res = rt;
    }
    return res < opt.tolerance;
}

}  // namespace detail

/// Solves R(eps_k) = e_k, rho_k R'(eps_k) = r_k at complex coupling lambda by Newton
/// continuation along the straight path from 0, halving steps on failure.
inline SpectralCurve solve_curve(const ModelSpec& model, cplx lambda, const SolveOptions& opt = {}) {
    model.validate();
    const int d = model.d();
    auto e = model.e_double();
    std::vector<double> r;
    for (const auto& x : model.r) r.push_back(x.get_d());
    double N = model.N.get_d();
    detail::CurveUnknowns x{std::vector<cplx>(e.begin(), e.end()), std::vector<cplx>(r.begin(), r.end())};
    auto make = [&](const detail::CurveUnknowns& u) {
        SpectralCurve c(u.eps, u.rho, N, lambda);
        ModelSpec m = model;
        m.lambda = lambda.real();
        c.set_model(m);
        return c;
    };
    if (lambda == cplx{}) return make(x);
    double t = 0.0, h = std::min(1.0, opt.initial_step);
    int halvings = 0;
    detail::CurveUnknowns prev = x;
    double t_prev = 0.0;
    bool have_prev = false;
    while (t < 1.0) {
        double t_next = std::min(1.0, t + h);
        detail::CurveUnknowns guess = x;
        if (have_prev && t > t_prev) {
            double s = (t_next - t) / (t - t_prev);
            for (int k = 0; k < d; ++k) {
                guess.eps[static_cast<std::size_t>(k)] += s * (x.eps[static_cast<std::size_t>(k)] - prev.eps[static_cast<std::size_t>(k)]);
                guess.rho[static_cast<std::size_t>(k)] += s * (x.rho[static_cast<std::size_t>(k)] - prev.rho[static_cast<std::size_t>(k)]);
            }
        }
        if (detail::newton_curve(guess, e, r, t_next * lambda / N, opt)) {
            prev = x;
            t_prev = t;
            have_prev = true;
            x = std::move(guess);
            t = t_next;
            h = std::min(1.0, h * 1.5);
        } else {
            if (++halvings > opt.max_halvings) throw ContinuationError(t_next * lambda, t * lambda);
            h *= 0.5;
        }
    }
    return make(x);
}

inline SpectralCurve solve_curve(const ModelSpec& model, const SolveOptions& opt = {}) {
    return solve_curve(model, cplx(model.lambda, 0.0), opt);
}

/// One-parameter family of curves: either fixed free-theory data (e_k, r_k) solved at each
/// lambda, or fixed curve data (eps_k, rho_k) used directly.
struct CurveFamilySpec {
    enum class Mode { FixedModel, FixedCurve };
    Mode mode = Mode::FixedCurve;
    ModelSpec model;
    std::vector<double> epsilon;
    std::vector<double> rho;
    double N = 1.0;
    double lambda_min = 0.0;
    double lambda_max = 1.0;

    static CurveFamilySpec fixed_curve(std::vector<double> eps, std::vector<double> rho, double lmin, double lmax, double N = 1.0) {
        CurveFamilySpec f;
        f.mode = Mode::FixedCurve;
        f.epsilon = std::move(eps);
        f.rho = std::move(rho);
        f.N = N;
        f.lambda_min = lmin;
        f.lambda_max = lmax;
        return f;
    }
    static CurveFamilySpec fixed_model(const ModelSpec& m, double lmin, double lmax) {
        CurveFamilySpec f;
        f.mode = Mode::FixedModel;
        f.model = m;
        f.lambda_min = lmin;
        f.lambda_max = lmax;
        return f;
    }

    void validate() const {
        if (!(lambda_min < lambda_max)) throw std::invalid_argument("family needs lambda_min < lambda_max");
        if (mode == Mode::FixedModel) {
            model.validate();
            return;
        }
        if (epsilon.empty() || epsilon.size() != rho.size()) throw std::invalid_argument("family needs matching eps and rho");
        for (std::size_t k = 0; k < epsilon.size(); ++k) {
            if (!(epsilon[k] > 0) || !(rho[k] > 0)) throw std::invalid_argument("family eps and rho must be positive");
            if (k > 0 && !(epsilon[k - 1] < epsilon[k])) throw std::invalid_argument("family eps must be strictly increasing");
        }
    }

    SpectralCurve at(double lambda) const {
        if (mode == Mode::FixedModel) return solve_curve(model, cplx(lambda, 0.0));
        return SpectralCurve(std::vector<cplx>(epsilon.begin(), epsilon.end()), std::vector<cplx>(rho.begin(), rho.end()), N,
                             cplx(lambda, 0.0));
    }
};

struct CriticalCoupling {
    double lambda = 0.0;
    double min_distance = 0.0;  ///< closest approach of the two colliding ramification points
    int first = -1, second = -1;
};

namespace detail {
/// Re[(b_a - b_b)^2] for the closest pair of upper half-plane ramification points: positive
/// while they share an imaginary part, negative once they share a real part.
inline std::pair<double, std::pair<int, int>> collision_indicator(const SpectralCurve& c) {
    const auto& b = c.beta();
    int best_a = -1, best_b = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int a = 0; a < static_cast<int>(b.size()); ++a)
        for (int q = a + 1; q < static_cast<int>(b.size()); ++q) {
            if (b[static_cast<std::size_t>(a)].imag() < 0 || b[static_cast<std::size_t>(q)].imag() < 0) continue;
            double dist = std::abs(b[static_cast<std::size_t>(a)] - b[static_cast<std::size_t>(q)]);
            if (dist < bd) {
                bd = dist;
                best_a = a;
                best_b = q;
            }
        }
    if (best_a < 0) return {std::numeric_limits<double>::quiet_NaN(), {-1, -1}};
    cplx diff = b[static_cast<std::size_t>(best_a)] - b[static_cast<std::size_t>(best_b)];
    return {(diff * diff).real(), {best_a, best_b}};
}
}  // namespace detail

/// Smallest lambda in the family range where two ramification points collide, by bisection on
/// the sign of the collision indicator after a uniform scan.
inline CriticalCoupling critical_lambda(const CurveFamilySpec& family, int scan_points = 400, double tolerance = 1e-13) {
    family.validate();
    double lo = std::max(family.lambda_min, 1e-12);
    double hi = family.lambda_max;
    auto indicator = [&](double l) { return detail::collision_indicator(family.at(l)).first; };
    double prev_l = lo, prev_v = indicator(lo);
    for (int s = 1; s <= scan_points; ++s) {
        double l = lo + (hi - lo) * s / scan_points;
        double v = indicator(l);
        if (std::isfinite(prev_v) && std::isfinite(v) && ((prev_v > 0) != (v > 0))) {
            double a = prev_l, b = l, fa = prev_v;
            while (b - a > tolerance * std::max(1.0, b)) {
                double m = 0.5 * (a + b);
                double fm = indicator(m);
                if ((fm > 0) == (fa > 0)) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            CriticalCoupling out;
            out.lambda = 0.5 * (a + b);
            auto [val, pair] = detail::collision_indicator(family.at(out.lambda));
            out.first = pair.first;
            out.second = pair.second;
            out.min_distance = std::sqrt(std::abs(val));
            return out;
        }
        prev_l = l;
        prev_v = v;
    }
    std::ostringstream os;
    os << "no critical coupling in [" << family.lambda_min << ", " << family.lambda_max << "]";
    throw std::domain_error(os.str());
}

/// Direct root-tracking cross-check: lambda in the range minimising the distance between the
/// closest pair of upper ramification points (golden-section search after a scan).
inline CriticalCoupling closest_approach(const CurveFamilySpec& family, int scan_points = 400) {
    family.validate();
    double lo = std::max(family.lambda_min, 1e-12), hi = family.lambda_max;
    auto dist = [&](double l) {
        const auto& b = family.at(l).beta();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < b.size(); ++a)
            for (std::size_t q = a + 1; q < b.size(); ++q)
                if (b[a].imag() >= 0 && b[q].imag() >= 0) best = std::min(best, std::abs(b[a] - b[q]));
        return best;
    };
    int best_s = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int s = 0; s <= scan_points; ++s) {
        double v = dist(lo + (hi - lo) * s / scan_points);
        if (v < best_v) {
            best_v = v;
            best_s = s;
        }
    }
    double step = (hi - lo) / scan_points;
    double a = std::max(lo, lo + (best_s - 1) * step), b = std::min(hi, lo + (best_s + 1) * step);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), dd = a + g * (b - a);
    double fc = dist(c), fd = dist(dd);
    for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
        if (fc < fd) {
            b = dd;
            dd = c;
            fd = fc;
            c = b - g * (b - a);
            fc = dist(c);
        } else {
            a = c;
            c = dd;
            fc = fd;
            dd = a + g * (b - a);
            fd = dist(dd);
        }
    }
    CriticalCoupling out;
    out.lambda = 0.5 * (a + b);
    out.min_distance = dist(out.lambda);
    return out;
}

/// Preimages of the vertical cut [R(beta_i), R(conj beta_i)] with continuity-tracked sheets.
struct CutTrace {
    int cut = 0;
    std::vector<double> parameter;                 ///< t in [0,1] along the cut
    std::vector<std::vector<cplx>> sheets;         ///< sheets[s][sample]
    std::vector<char> flagged;                     ///< per sample: sheet tracking jumped
};

/// Closed curve assembled from traced arcs, with winding data.
struct PreimageLoop {
    std::vector<cplx> points;
    std::vector<int> winding;  ///< winding number around -eps_k
    std::vector<int> cuts;     ///< cuts contributing arcs
};

struct CutGeometry {
    std::vector<CutTrace> traces;
    std::vector<PreimageLoop> loops;
    std::vector<std::pair<int, int>> nesting;  ///< (outer loop, inner loop)
    int open_arcs = 0;
    bool any_flagged = false;
};

namespace detail {

inline double polygon_winding(const std::vector<cplx>& poly, cplx p) {
    double total = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        cplx a = poly[i] - p, b = poly[(i + 1) % poly.size()] - p;
        total += std::arg(b / a);
    }
    return total / (2.0 * std::numbers::pi);
}

}  // namespace detail

/// Samples each cut with t = sin^2(pi s/2) (denser near the end points) and tracks the d+1
/// preimages by nearest-neighbour assignment between consecutive samples.
inline std::vector<CutTrace> trace_branch_cuts(const SpectralCurve& curve, int samples_per_cut) {
    if (samples_per_cut < 2) throw std::invalid_argument("need at least two samples per cut");
    const int d = curve.d();
    if (static_cast<int>(curve.beta().size()) != 2 * d) throw std::domain_error("curve has no paired ramification points");
    std::vector<CutTrace> out;
    for (int i = 0; i < d; ++i) {
        cplx b = curve.beta()[static_cast<std::size_t>(i)], bb = curve.beta()[static_cast<std::size_t>(i + d)];
        cplx za = curve.R(b), zb = curve.R(bb);
        CutTrace tr;
        tr.cut = i;
        std::vector<cplx> prev;
        double typical = 0.0;
        for (int s = 0; s < samples_per_cut; ++s) {
            double u = static_cast<double>(s) / (samples_per_cut - 1);
            double t = std::pow(std::sin(0.5 * std::numbers::pi * u), 2);
            auto pre = curve.preimages(za + t * (zb - za));
            if (s == 0) {
                tr.sheets.assign(pre.size(), {});
                for (std::size_t k = 0; k < pre.size(); ++k) tr.sheets[k].push_back(pre[k]);
                tr.parameter.push_back(t);
                tr.flagged.push_back(0);
                prev = pre;
                continue;
            }
            if (pre.size() != prev.size()) throw std::domain_error("preimage count changed along a cut");
            // best permutation (d+1 <= 6 keeps this cheap)
            std::vector<int> perm(pre.size()), best;
            std::iota(perm.begin(), perm.end(), 0);
            double best_cost = std::numeric_limits<double>::infinity(), best_max = 0.0;
            do {
                double cost = 0.0, mx = 0.0;
                for (std::size_t k = 0; k < prev.size(); ++k) {
                    double dd = std::abs(pre[static_cast<std::size_t>(perm[k])] - prev[k]);
                    cost += dd;
                    mx = std::max(mx, dd);
                }
                if (cost < best_cost) {
                    best_cost = cost;
                    best_max = mx;
                    best = perm;
                }
            } while (std::next_permutation(perm.begin(), perm.end()));
            std::vector<cplx> next(pre.size());
            for (std::size_t k = 0; k < prev.size(); ++k) next[k] = pre[static_cast<std::size_t>(best[k])];
            bool jump = typical > 0 && best_max > 25.0 * typical + 1e-9;
            typical = typical == 0 ? best_max : 0.8 * typical + 0.2 * best_max;
            for (std::size_t k = 0; k < next.size(); ++k) tr.sheets[k].push_back(next[k]);
            tr.parameter.push_back(t);
            tr.flagged.push_back(jump ? 1 : 0);
            prev = next;
        }
        out.push_back(std::move(tr));
    }
    return out;
}

/// Joins traced arcs whose end points coincide into closed loops and reports winding numbers
/// around each -eps_k and loop nesting.
inline CutGeometry branch_cut_geometry(const SpectralCurve& curve, int samples_per_cut) {
    CutGeometry g;
    g.traces = trace_branch_cuts(curve, samples_per_cut);
    struct Arc {
        std::vector<cplx> pts;
        int cut;
    };
    std::vector<Arc> arcs;
    for (const auto& tr : g.traces) {
        for (const auto& s : tr.sheets) arcs.push_back({s, tr.cut});
        for (char f : tr.flagged) g.any_flagged = g.any_flagged || f;
    }
    double scale = 0.0;
    for (auto e : curve.epsilon()) scale = std::max(scale, std::abs(e));
    const double tol = 1e-6 * std::max(1.0, scale);
    // end-point nodes
    std::vector<cplx> nodes;
    auto node_of = [&](cplx p) {
        for (std::size_t k = 0; k < nodes.size(); ++k)
            if (std::abs(nodes[k] - p) < tol) return static_cast<int>(k);
        nodes.push_back(p);
        return static_cast<int>(nodes.size()) - 1;
    };
    std::vector<std::array<int, 2>> ends;
    for (const auto& a : arcs) ends.push_back({node_of(a.pts.front()), node_of(a.pts.back())});
    std::vector<std::vector<int>> incident(nodes.size());
    for (std::size_t a = 0; a < arcs.size(); ++a) {
        incident[static_cast<std::size_t>(ends[a][0])].push_back(static_cast<int>(a));
        incident[static_cast<std::size_t>(ends[a][1])].push_back(static_cast<int>(a));
    }
    std::vector<char> used(arcs.size(), 0);
    for (std::size_t start = 0; start < arcs.size(); ++start) {
        if (used[start]) continue;
        // walk the component; it is a loop when every node on it has degree 2
        std::vector<int> comp_arcs;
        std::vector<int> stack{static_cast<int>(start)};
        std::vector<char> seen(arcs.size(), 0);
        seen[start] = 1;
        bool closed = true;
        while (!stack.empty()) {
            int a = stack.back();
            stack.pop_back();
            comp_arcs.push_back(a);
            for (int e : ends[static_cast<std::size_t>(a)]) {
                if (incident[static_cast<std::size_t>(e)].size() != 2) closed = false;
                for (int b : incident[static_cast<std::size_t>(e)])
                    if (!seen[static_cast<std::size_t>(b)]) {
                        seen[static_cast<std::size_t>(b)] = 1;
                        stack.push_back(b);
                    }
            }
        }
        for (int a : comp_arcs) used[static_cast<std::size_t>(a)] = 1;
        if (!closed) {
            g.open_arcs += static_cast<int>(comp_arcs.size());
            continue;
        }
        // order arcs along the cycle
        PreimageLoop loop;
        int cur_arc = comp_arcs.front();
        int cur_node = ends[static_cast<std::size_t>(cur_arc)][0];
        std::vector<char> done(arcs.size(), 0);
        for (std::size_t step = 0; step < comp_arcs.size(); ++step) {
            done[static_cast<std::size_t>(cur_arc)] = 1;
            const auto& pts = arcs[static_cast<std::size_t>(cur_arc)].pts;
            bool forward = ends[static_cast<std::size_t>(cur_arc)][0] == cur_node;
            if (forward)
                loop.points.insert(loop.points.end(), pts.begin(), pts.end() - 1);
            else
                loop.points.insert(loop.points.end(), pts.rbegin(), pts.rend() - 1);
            loop.cuts.push_back(arcs[static_cast<std::size_t>(cur_arc)].cut);
            cur_node = forward ? ends[static_cast<std::size_t>(cur_arc)][1] : ends[static_cast<std::size_t>(cur_arc)][0];
            int next = -1;
            for (int b : incident[static_cast<std::size_t>(cur_node)])
                if (!done[static_cast<std::size_t>(b)]) next = b;
            if (next < 0) break;
            cur_arc = next;
        }
        std::sort(loop.cuts.begin(), loop.cuts.end());
        loop.cuts.erase(std::unique(loop.cuts.begin(), loop.cuts.end()), loop.cuts.end());
        // counter-clockwise orientation (positive signed area)
        double area = 0.0;
        for (std::size_t k = 0; k < loop.points.size(); ++k) {
            cplx a = loop.points[k], b = loop.points[(k + 1) % loop.points.size()];
            area += a.real() * b.imag() - b.real() * a.imag();
        }
        if (area < 0) std::reverse(loop.points.begin(), loop.points.end());
        for (auto e : curve.epsilon())
            loop.winding.push_back(static_cast<int>(std::lround(detail::polygon_winding(loop.points, -e))));
        g.loops.push_back(std::move(loop));
    }
    for (std::size_t a = 0; a < g.loops.size(); ++a)
        for (std::size_t b = 0; b < g.loops.size(); ++b) {
            if (a == b) continue;
            // b inside a when a winds around every sampled point of b
            bool inside = true;
            const auto& pb = g.loops[b].points;
            for (std::size_t k = 0; k < pb.size(); k += std::max<std::size_t>(1, pb.size() / 8))
                if (std::lround(detail::polygon_winding(g.loops[a].points, pb[k])) == 0) inside = false;
            if (inside) g.nesting.emplace_back(static_cast<int>(a), static_cast<int>(b));
        }
    return g;
}

}  // namespace qkm
