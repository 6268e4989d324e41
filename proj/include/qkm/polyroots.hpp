#pragma once

#include <qkm/contour.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkm {

class RootFindingError : public std::runtime_error {
public:
    RootFindingError(const std::string& what, std::vector<double> residuals)
        : std::runtime_error(what), residuals_(std::move(residuals)) {}
    const std::vector<double>& residuals() const { return residuals_; }

private:
    std::vector<double> residuals_;
};

/// Polynomial with complex coefficients, c[k] multiplies z^k.
using Poly = std::vector<cplx>;

inline Poly poly_mul(const Poly& a, const Poly& b) {
    Poly r(a.size() + b.size() - 1, cplx{});
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

inline Poly poly_add(Poly a, const Poly& b) {
    if (b.size() > a.size()) a.resize(b.size(), cplx{});
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    return a;
}

inline Poly poly_scale(Poly a, cplx s) {
    for (auto& c : a) c *= s;
    return a;
}

/// p(z) and p'(z) by Horner.
inline std::pair<cplx, cplx> poly_eval_d(const Poly& p, cplx z) {
    cplx v{}, dv{};
    for (std::size_t k = p.size(); k-- > 0;) {
        dv = dv * z + v;
        v = v * z + p[k];
    }
    return {v, dv};
}

inline cplx poly_eval(const Poly& p, cplx z) { return poly_eval_d(p, z).first; }

struct RootOptions {
    int max_iterations = 500;
    double tolerance = 1e-15;
    int restarts = 4;
};

namespace detail {

inline bool aberth_pass(const Poly& p, std::vector<cplx>& z, const RootOptions& opt) {
    const std::size_t n = z.size();
    for (int it = 0; it < opt.max_iterations; ++it) {
        double biggest = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto [v, dv] = poly_eval_d(p, z[i]);
            if (v == cplx{}) continue;
            cplx ratio = v / dv;
            cplx repulsion{};
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) repulsion += 1.0 / (z[i] - z[j]);
            cplx step = ratio / (1.0 - ratio * repulsion);
            if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) return false;
            z[i] -= step;
            biggest = std::max(biggest, std::abs(step) / std::max(1.0, std::abs(z[i])));
        }
        if (biggest < opt.tolerance) return true;
        // converged to rounding level: every residual within a small multiple of its backward-error bound
        bool at_noise = true;
        for (std::size_t i = 0; i < n && at_noise; ++i) {
            double bound = 0.0, az = std::abs(z[i]), pw = 1.0;
            for (const auto& c : p) {
                bound += std::abs(c) * pw;
                pw *= az;
            }
            at_noise = std::abs(poly_eval(p, z[i])) <= 64.0 * std::numeric_limits<double>::epsilon() * bound;
        }
        if (at_noise && it > 4) return true;
    }
    return false;
}

}  // namespace detail

/// All roots of p by Aberth-Ehrlich simultaneous iteration, then Newton polishing.
/// Leading zero coefficients are stripped. Deterministic starting points.
inline std::vector<cplx> polynomial_roots(Poly p, const RootOptions& opt = {}) {
    while (!p.empty() && p.back() == cplx{}) p.pop_back();
    if (p.size() < 2) return {};
    const std::size_t n = p.size() - 1;
    cplx lead = p.back();
    for (auto& c : p) c /= lead;
    // Cauchy bound on the root moduli
    double bound = 0.0;
    for (std::size_t k = 0; k < n; ++k) bound = std::max(bound, std::abs(p[k]));
    bound = 1.0 + bound;
    double mean_radius = std::pow(std::abs(p[0]) + 1e-300, 1.0 / static_cast<double>(n));
    cplx centre = -p[n - 1] / static_cast<double>(n);
    std::vector<cplx> z(n);
    for (int attempt = 0; attempt <= opt.restarts; ++attempt) {
        double radius = attempt == 0 ? std::min(mean_radius, bound) : bound * (0.5 + 0.25 * attempt);
        double offset = 0.4 + 0.9 * attempt;
        for (std::size_t i = 0; i < n; ++i)
            z[i] = centre + radius * std::polar(1.0, 2.0 * std::numbers::pi * i / n + offset);
        if (detail::aberth_pass(p, z, opt)) break;
        if (attempt == opt.restarts) {
            std::vector<double> res;
            for (auto r : z) res.push_back(std::abs(poly_eval(p, r)));
            throw RootFindingError("polynomial root finder did not converge", res);
        }
    }
    for (auto& r : z) {
        for (int k = 0; k < 3; ++k) {
            auto [v, dv] = poly_eval_d(p, r);
            if (dv == cplx{}) break;
            cplx nr = r - v / dv;
            if (!(std::abs(poly_eval(p, nr)) < std::abs(v))) break;
            r = nr;
        }
    }
    return z;
}

}  // namespace qkm
