#pragma once

#include <qkm/contour.hpp>
#include <qkm/correlators.hpp>
#include <qkm/curve.hpp>
#include <qkm/multidual.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkm {

/// (1/2 pi i) times the contour integral of f around spec's circle; f may return any value type
/// supporting + and scaling by complex numbers (e.g. multi-duals).
template <class V, class F>
V residue_of(F&& f, const ContourSpec& spec) {
    spec.validate();
    V acc(0.0);
    for (int j = 0; j < spec.node_count; ++j) {
        cplx z = spec.node(j);
        V w;
        try {
            w = f(z);
        } catch (const std::exception& ex) {
            throw ContourNodeError(j, ex.what());
        }
        acc += w * V(z - spec.center);
    }
    return acc * V(cplx(1.0 / spec.node_count, 0.0));
}

/// Residue of f at `center` by trapezoidal quadrature on the circle of spec.radius.
template <class F>
cplx residue(F&& f, cplx center, ContourSpec spec = {}) {
    spec.center = center;
    return contour_residue(f, spec);
}

/// Singular points of the integrands: +-beta_j, -eps_k, and caller-supplied extras.
inline std::vector<cplx> pole_inventory(const SpectralCurve& c, const std::vector<cplx>& extra = {}) {
    std::vector<cplx> out;
    for (auto b : c.beta()) {
        out.push_back(b);
        out.push_back(-b);
    }
    for (auto e : c.epsilon()) out.push_back(-e);
    out.insert(out.end(), extra.begin(), extra.end());
    return out;
}

/// Half the distance from center to the nearest other inventory point (points within `same` of
/// center count as the center itself).
inline double auto_radius(cplx center, const std::vector<cplx>& inventory, double same = 1e-12) {
    double dmin = std::numeric_limits<double>::infinity();
    for (auto p : inventory) {
        double d = std::abs(p - center);
        if (d > same) dmin = std::min(dmin, d);
    }
    if (!std::isfinite(dmin)) throw std::domain_error("empty pole inventory");
    return 0.5 * dmin;
}

struct KernelContext {
    const SpectralCurve* curve = nullptr;
    int branch = 0;          ///< index into curve->beta()
    ContourSpec quadrature;  ///< residue circle around beta[branch]
};

/// Scalar part of the Bergman kernel with one reflected copy: 1/(x-y)^2 + 1/(x+y)^2.
template <class S>
S omega02_coefficient(const S& x, const S& y) {
    S a = x - y, b = x + y;
    return S(1.0) / (a * a) + S(1.0) / (b * b);
}

/// K_i(z,q) with the involution supplied; dz / dR(sigma) realized as 1/R'(sigma).
inline cplx kernel_Ki_at(const SpectralCurve& c, cplx z, cplx q, cplx sigma) {
    cplx den = c.Rp(sigma) * (c.R(-sigma) - c.R(-q));
    if (den == cplx{}) throw std::domain_error("kernel singular");
    return 0.5 * (1.0 / (z - q) - 1.0 / (z - sigma)) / den;
}

inline cplx kernel_Ki(const KernelContext& ctx, cplx z, cplx q) {
    cplx sigma = ctx.curve->galois_involution(ctx.branch, q);
    return kernel_Ki_at(*ctx.curve, z, q, sigma);
}

namespace detail {
inline cplx base_value_c(const cplx& x) { return x; }
template <int V, int K>
cplx base_value_c(const MultiDual<cplx, V, K>& x) {
    return x.value();
}
}  // namespace detail

template <class S>
S kernel_Ktilde_generic(const SpectralCurve& c, const S& z, const S& q, const S& u) {
    S den = c.Rp(q) * (c.R(u) - c.R(-q));
    if (detail::base_value_c(den) == cplx{}) throw std::domain_error("kernel singular");
    return S(0.5) * (S(1.0) / (z - q) - S(1.0) / (z + u)) / den;
}

inline cplx kernel_Ktilde(const SpectralCurve& c, cplx z, cplx q, cplx u) { return kernel_Ktilde_generic<cplx>(c, z, q, u); }

struct BtrParts {
    cplx polar;         ///< residue sum at the ramification points
    cplx antidiagonal;  ///< the two d_u K-tilde terms (already subtracted in `total`)
    cplx total;         ///< Omega_3 = lambda (polar - antidiagonal) / (R'(u) R'(v) R'(z))
    cplx form;          ///< coefficient of du dv dz in omega_{0,3}
};

struct BtrOptions {
    int nodes = 64;
    double radius_fraction = 0.5;  ///< of the distance to the nearest other singular point
};

namespace detail {

/// Residue radius around beta_i: excludes the other singular points and stays inside the
/// involution basin (half the distance to the nearest other preimage family).
inline double ramification_radius(const SpectralCurve& c, int i, const std::vector<cplx>& points, const BtrOptions& opt) {
    cplx b = c.beta()[static_cast<std::size_t>(i)];
    auto inv = pole_inventory(c, points);
    // the other preimages of R(beta_i) bound the basin where the involution is single-valued
    for (auto p : c.preimages(c.R(b))) inv.push_back(p);
    return opt.radius_fraction * auto_radius(b, inv, 1e-7 * std::max(1.0, std::abs(b)));
}

/// Res_{q -> beta_i} K_i(z,q) [w(u,q) w(v,s) + w(v,q) w(u,s)], s = sigma_i(q).
inline cplx polar_term(const SpectralCurve& c, int i, cplx u, cplx v, cplx z, const BtrOptions& opt) {
    double r = ramification_radius(c, i, {u, -u, v, -v, z, -z}, opt);
    ContourSpec spec{c.beta()[static_cast<std::size_t>(i)], r, opt.nodes};
    KernelContext ctx{&c, i, spec};
    return contour_residue(
        [&](cplx q) {
            cplx s = c.galois_involution(i, q);
            cplx k = kernel_Ki_at(c, z, q, s);
            return k * (omega02_coefficient(u, q) * omega02_coefficient(v, s) + omega02_coefficient(v, q) * omega02_coefficient(u, s));
        },
        ctx.quadrature);
}

/// d/du of Res_{q -> -u} 2 K~(z,q,u) A(u,q) w(v,q) with A the u-antiderivative of w(u,q); the
/// circle moves with u, so q = -u + t on a fixed circle in t.
inline cplx antidiagonal_term(const SpectralCurve& c, cplx u, cplx v, cplx z, const BtrOptions& opt) {
    using D = Dual<cplx>;
    auto inv = pole_inventory(c, {u, v, -v, z, -z});
    double r = opt.radius_fraction * auto_radius(-u, inv, 1e-12);
    // other solutions of R(-q) = R(u) also lie off the circle
    for (auto p : c.preimages(c.R(u)))
        if (std::abs(p - u) > 1e-9 * std::max(1.0, std::abs(u))) r = std::min(r, opt.radius_fraction * std::abs(-p + u));
    ContourSpec spec{cplx{}, r, opt.nodes};
    D U = D::variable(u, 0);
    D V(v), Z(z);
    D res = residue_of<D>(
        [&](cplx t) {
            D q = -U + D(t);
            D anti = -(D(1.0) / (U - q) + D(1.0) / (U + q));
            return D(2.0) * kernel_Ktilde_generic<D>(c, Z, q, U) * anti * omega02_coefficient(V, q);
        },
        spec);
    return res.derivative(0);
}

}  // namespace detail

/// Omega_3 assembled from the recursion: ramification residues minus the antidiagonal terms,
/// converted from the form omega_{0,3} = lambda^{-1} Omega_3 R'R'R' du dv dz.
inline BtrParts omega03_btr_parts(const SpectralCurve& c, cplx u, cplx v, cplx z, const BtrOptions& opt = {}) {
    double scale = detail::curve_scale(c);
    auto close = [&](cplx a, cplx b) { return std::abs(a - b) < 1e-10 * scale; };
    if (close(u, v) || close(u, -v) || close(u, z) || close(u, -z) || close(v, z) || close(v, -z))
        throw std::domain_error("omega03_btr needs pairwise distinct, non-opposite arguments");
    for (auto b : c.beta())
        for (auto x : {u, v, z})
            if (close(x, b) || close(x, -b)) throw std::domain_error("omega03_btr argument at a ramification point");
    BtrParts p{};
    for (int i = 0; i < static_cast<int>(c.beta().size()); ++i) p.polar += detail::polar_term(c, i, u, v, z, opt);
    p.antidiagonal = detail::antidiagonal_term(c, u, v, z, opt) + detail::antidiagonal_term(c, v, u, z, opt);
    p.form = p.polar - p.antidiagonal;
    p.total = c.lambda() * p.form / (c.Rp(u) * c.Rp(v) * c.Rp(z));
    return p;
}

inline cplx omega03_btr(const SpectralCurve& c, cplx u, cplx v, cplx z, const BtrOptions& opt = {}) {
    return omega03_btr_parts(c, u, v, z, opt).total;
}

struct InvolutionIdentity {
    cplx lhs, rhs;
    double residual;
};

/// The involution identity at |I| = 2 in scalar coefficients (pullback under q -> -q):
/// W(q) - W(-q) = R'(-q) Res_{z->q} w(u1,z) w(u2,z) / (R'(z) (R(-z) - R(-q))^2), W the coefficient of omega_{0,3}.
inline InvolutionIdentity involution_identity_check(const SpectralCurve& c, cplx u1, cplx u2, cplx q, int nodes = 64) {
    auto W = [&](cplx x) { return omega3_exact(c, u1, u2, x) * c.Rp(u1) * c.Rp(u2) * c.Rp(x) / c.lambda(); };
    InvolutionIdentity out{};
    out.lhs = W(q) - W(-q);
    // other zeros of R(-z) - R(-q) besides z = q
    std::vector<cplx> inv = pole_inventory(c, {u1, -u1, u2, -u2});
    for (auto p : c.preimages(c.R(-q))) inv.push_back(-p);
    double r = auto_radius(q, inv, 1e-9 * std::max(1.0, std::abs(q)));
    cplx Rmq = c.R(-q);
    out.rhs = c.Rp(-q) * residue(
                             [&](cplx z) {
                                 cplx den = c.R(-z) - Rmq;
                                 return omega02_coefficient(u1, z) * omega02_coefficient(u2, z) / (den * den * c.Rp(z));
                             },
                             q, ContourSpec{q, r, nodes});
    out.residual = std::abs(out.lhs - out.rhs);
    return out;
}

struct ContinuityRow {
    double delta;
    cplx below, above;
    double difference;
    double vieta_below, vieta_above;
    double merged_real_offset;  ///< |Re(beta_a) - Re(beta_b)| of the merged pair above criticality
};

struct ContinuityReport {
    double lambda_crit = 0;
    std::vector<ContinuityRow> rows;
    double slope = 0;  ///< log-log slope of difference against delta
};

/// Omega_3 at lambda_crit +- delta on a fixed-curve family with equal rho.
inline ContinuityReport continuity_across_critical(const CurveFamilySpec& family, cplx u, cplx v, cplx z,
                                                   std::vector<double> deltas = {1e-2, 1e-3, 1e-4}) {
    family.validate();
    ContinuityReport rep;
    auto crit = critical_lambda(family);
    rep.lambda_crit = crit.lambda;
    for (double d : deltas) {
        ContinuityRow row{};
        row.delta = d;
        SpectralCurve lo = family.at(crit.lambda - d), hi = family.at(crit.lambda + d);
        row.below = omega3_exact(lo, u, v, z);
        row.above = omega3_exact(hi, u, v, z);
        row.difference = std::abs(row.above - row.below);
        row.vieta_below = lo.vieta_residual();
        row.vieta_above = hi.vieta_residual();
        auto [val, pair] = detail::collision_indicator(hi);
        (void)val;
        row.merged_real_offset = std::abs(hi.beta()[static_cast<std::size_t>(pair.first)].real() -
                                          hi.beta()[static_cast<std::size_t>(pair.second)].real());
        rep.rows.push_back(row);
    }
    if (rep.rows.size() >= 2) {
        // least squares on (log delta, log difference)
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(rep.rows.size());
        for (const auto& r : rep.rows) {
            double x = std::log(r.delta), y = std::log(r.difference);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return rep;
}

}  // namespace qkm
