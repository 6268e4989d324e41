#pragma once

#include <qkm/correlators.hpp>
#include <qkm/curve.hpp>
#include <qkm/graphs.hpp>
#include <qkm/model.hpp>
#include <qkm/multidual.hpp>
#include <qkm/series.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkm {

/// Boundary cycles given directly by the spectral value of each leg.
template <class T>
using ValueCycles = std::vector<std::vector<T>>;

/// Genus-g correlator series for boundary cycles of leg values.
template <class T>
Series<T> correlator(const ValueCycles<T>& cycles, int order, const LoopMeasure<T>& mu,
                     DiagramLibrary& lib = default_library(), int genus = 0) {
    std::vector<int> lengths;
    std::vector<T> values;
    for (const auto& c : cycles) {
        lengths.push_back(static_cast<int>(c.size()));
        values.insert(values.end(), c.begin(), c.end());
    }
    return correlator_series<T>(BoundarySpec::from_lengths(lengths), genus, order, values, mu, lib);
}

// ---------------------------------------------------------------- creation operator

using DualQ = Dual<Rational>;

namespace detail {
template <class T>
LoopMeasure<DualQ> lift_measure(const LoopMeasure<T>& mu) {
    LoopMeasure<DualQ> out;
    for (const auto& [x, w] : mu.atoms) out.atoms.emplace_back(DualQ(x), DualQ(w));
    return out;
}
}  // namespace detail

/// One eigenvalue E_q of class q split off from the measure and seeded as the differentiation
/// variable; everything else stays at its rational value.
struct CreationPoint {
    LoopMeasure<Rational> mu;        ///< the model measure
    LoopMeasure<DualQ> mu_split;     ///< same measure with E_q as its own atom of weight 1/N
    Rational Eq;
    DualQ Eq_seeded;
    Rational N;
};

inline CreationPoint creation_point(const ModelSpec& m, int q_class) {
    m.validate();
    if (q_class < 0 || q_class >= m.d()) throw std::out_of_range("creation class index out of range");
    CreationPoint p;
    p.mu = LoopMeasure<Rational>::from_model(m);
    p.N = m.N;
    p.Eq = m.e[static_cast<std::size_t>(q_class)];
    p.Eq_seeded = DualQ::variable(p.Eq, 0);
    for (int k = 0; k < m.d(); ++k) {
        Rational w = m.r[static_cast<std::size_t>(k)] / m.N;
        if (k == q_class) w -= Rational(1) / m.N;
        if (w < 0) throw std::invalid_argument("class multiplicity below one");
        if (w > 0) p.mu_split.atoms.emplace_back(DualQ(m.e[static_cast<std::size_t>(k)]), DualQ(w));
    }
    p.mu_split.atoms.emplace_back(p.Eq_seeded, DualQ(Rational(1) / m.N));
    return p;
}

/// -N d/dE_q applied coefficient-wise to a series built from the split measure. The builder
/// receives the split measure and the seeded E_q.
template <class Builder>
Series<Rational> creation_derivative(Builder&& builder, const CreationPoint& p, int order) {
    Series<DualQ> s = builder(p.mu_split, p.Eq_seeded);
    Series<Rational> out(order);
    for (int v = 0; v <= std::min(order, s.order()); ++v) out[v] = -p.N * s[v].derivative(0);
    return out;
}

/// -N d/dE_q of the lambda^0 free-energy term -(1/2N^2) sum_{k,l} log(E_k + E_l): equals
/// (1/N) sum_l 1/(E_q + E_l).
inline Rational free_energy_log_creation(const CreationPoint& p) {
    Rational s = 0;
    for (const auto& [x, w] : p.mu.atoms) s += w / (p.Eq + x);
    return s;
}

struct PropTReport {
    std::string boundary;
    std::vector<Rational> residual;  ///< per order: LHS - RHS
    int loop_terms = 0, insertion_terms = 0, split_terms = 0;
    bool exact_zero() const {
        return std::all_of(residual.begin(), residual.end(), [](const Rational& r) { return r == 0; });
    }
};

/// Creation-operator identity at genus 0 for a boundary whose legs carry class indices:
/// T_q G_J = (1/N) sum_k G_{J|qk} + sum_{cycles, l} G_{[q,p_l] inserted} + mult * sum_{splits} G_{J1|q} G_{J2|q}.
/// Splits run over unordered pairs of nonempty cycle subsets; `split_multiplicity` weights them.
inline PropTReport propT_check(const ModelSpec& m, const std::vector<std::vector<int>>& classes, int q_class, int order,
                               int split_multiplicity = 2, DiagramLibrary& lib = default_library()) {
    CreationPoint p = creation_point(m, q_class);
    PropTReport rep;
    {
        BoundarySpec b;
        b.cycles = classes;
        rep.boundary = "classes " + b.to_string() + " q=" + std::to_string(q_class);
    }
    auto value = [&](int c) { return m.e.at(static_cast<std::size_t>(c)); };
    ValueCycles<Rational> J;
    for (const auto& cyc : classes) {
        std::vector<Rational> vals;
        for (int c : cyc) vals.push_back(value(c));
        J.push_back(vals);
    }
    Series<Rational> lhs(order);
    if (J.empty()) {
        lhs = creation_derivative([&](const LoopMeasure<DualQ>& mu, const DualQ&) { return free_energy_series<DualQ>(0, order, mu, lib); },
                                  p, order);
        lhs[0] += free_energy_log_creation(p);
    } else {
        ValueCycles<DualQ> Jd;
        for (const auto& cyc : J) {
            std::vector<DualQ> vals;
            for (const auto& x : cyc) vals.emplace_back(x);
            Jd.push_back(vals);
        }
        lhs = creation_derivative([&](const LoopMeasure<DualQ>& mu, const DualQ&) { return correlator<DualQ>(Jd, order, mu, lib); },
                                  p, order);
    }
    Series<Rational> rhs(order);
    // loop term
    for (const auto& [x, w] : p.mu.atoms) {
        auto cyc = J;
        cyc.push_back({p.Eq, x});
        rhs += correlator<Rational>(cyc, order, p.mu, lib) * w;
        ++rep.loop_terms;
    }
    // insertions [q, p_l] after position l
    for (std::size_t j = 0; j < J.size(); ++j)
        for (std::size_t l = 0; l < J[j].size(); ++l) {
            auto cyc = J;
            std::vector<Rational> ins(J[j].begin(), J[j].begin() + static_cast<std::ptrdiff_t>(l) + 1);
            ins.push_back(p.Eq);
            ins.push_back(J[j][l]);
            ins.insert(ins.end(), J[j].begin() + static_cast<std::ptrdiff_t>(l) + 1, J[j].end());
            cyc[j] = ins;
            rhs += correlator<Rational>(cyc, order, p.mu, lib);
            ++rep.insertion_terms;
        }
    // splittings into two nonempty blocks of whole cycles (unordered)
    const std::size_t b = J.size();
    if (b >= 2) {
        for (unsigned mask = 1; mask + 1 < (1u << b); ++mask) {
            if (mask & 1u) continue;  // fix cycle 0 in the second block to count each pair once
            ValueCycles<Rational> J1, J2;
            for (std::size_t j = 0; j < b; ++j) ((mask >> j) & 1u ? J1 : J2).push_back(J[j]);
            J1.push_back({p.Eq});
            J2.push_back({p.Eq});
            rhs += correlator<Rational>(J1, order, p.mu, lib) * correlator<Rational>(J2, order, p.mu, lib) *
                   Rational(split_multiplicity);
            ++rep.split_terms;
        }
    }
    for (int v = 0; v <= order; ++v) rep.residual.push_back(lhs[v] - rhs[v]);
    return rep;
}

// ---------------------------------------------------------------- Omega as polynomials in G

/// Genus-0 Omega_{q1,q2} from correlator series at leg values E1, E2. The special term
/// 1/(E1-E2)^2 is included only when E1 != E2 (coincident values give the regularized limit).
template <class T>
Series<T> omega2_from_correlators(const T& E1, const T& E2, int order, const LoopMeasure<T>& mu,
                                  DiagramLibrary& lib = default_library()) {
    Series<T> g = correlator<T>({{E1, E2}}, order, mu, lib);
    Series<T> s = g * g;
    for (const auto& [xk, wk] : mu.atoms)
        for (const auto& [xl, wl] : mu.atoms) s += correlator<T>({{E1, xk}, {E2, xl}}, order, mu, lib) * T(wk * wl);
    for (const auto& [xk, wk] : mu.atoms) {
        Series<T> t = correlator<T>({{E1, xk, E1, E2}}, order, mu, lib) + correlator<T>({{E2, xk, E2, E1}}, order, mu, lib) +
                      correlator<T>({{E1, xk, E2, xk}}, order, mu, lib);
        s += t * wk;
    }
    if (!(E1 == E2)) s[0] += T(1) / ((E1 - E2) * (E1 - E2));
    return s;
}

template <class T>
Series<T> omega2_from_correlators(const ModelSpec& m, int q1, int q2, int order, DiagramLibrary& lib = default_library()) {
    auto mu = LoopMeasure<T>::from_model(m);
    return omega2_from_correlators<T>(T(m.e.at(static_cast<std::size_t>(q1))), T(m.e.at(static_cast<std::size_t>(q2))), order, mu, lib);
}

/// Genus-0 Omega_{q1,q2,q3} from correlator series (triple, double and single loop sums plus
/// the products with the bare 2-point functions).
template <class T>
Series<T> omega3_from_correlators(const T& A, const T& B, const T& C, int order, const LoopMeasure<T>& mu,
                                  DiagramLibrary& lib = default_library()) {
    auto G = [&](const ValueCycles<T>& c) { return correlator<T>(c, order, mu, lib); };
    Series<T> s(order);
    for (const auto& [xj, wj] : mu.atoms)
        for (const auto& [xk, wk] : mu.atoms)
            for (const auto& [xl, wl] : mu.atoms) s += G({{A, xj}, {B, xk}, {C, xl}}) * T(wj * wk * wl);
    const T q[3] = {A, B, C};
    for (const auto& [xk, wk] : mu.atoms)
        for (const auto& [xl, wl] : mu.atoms) {
            const T k = xk, l = xl;
            Series<T> t(order);
            // |qa k qb k| qc l| for the cyclic triples
            for (int a = 0; a < 3; ++a) t += G({{q[a], k, q[(a + 1) % 3], k}, {q[(a + 2) % 3], l}});
            // |qa k qa qb| qc l| for every ordered pair a != b, c the remaining index
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    if (a == b) continue;
                    int c = 3 - a - b;
                    t += G({{q[a], k, q[a], q[b]}, {q[c], l}});
                }
            s += t * T(wk * wl);
        }
    for (const auto& [xk, wk] : mu.atoms) {
        const T k = xk;
        Series<T> t = G({{A, k, B, k, C, k}}) + G({{A, k, C, k, B, k}});
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                if (a == b) continue;
                int c = 3 - a - b;
                t += G({{q[a], k, q[a], q[b], q[a], q[c]}});  // |qa k qa qb qa qc|
                t += G({{q[a], k, q[a], q[b], q[c], q[b]}});  // |qa k qa qb qc qb|
                t += G({{k, q[a], k, q[b], q[c], q[b]}});     // |k qa k qb qc qb|
            }
        s += t * wk;
    }
    // 2 (1/N) sum_k over the three pairs (a,b) with third index c
    const int pairs[3][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};
    Series<T> prod(order);
    for (const auto& pr : pairs) {
        const T& a = q[pr[0]];
        const T& b = q[pr[1]];
        const T& c = q[pr[2]];
        Series<T> g2 = G({{a, b}});
        Series<T> inner = G({{a, b, a, c}}) + G({{b, a, b, c}});
        for (const auto& [xk, wk] : mu.atoms) inner += G({{c, xk}, {a, b}}) * wk;
        prod += g2 * inner;
    }
    s += prod * T(2);
    return s;
}

template <class T>
Series<T> omega3_from_correlators(const ModelSpec& m, int q1, int q2, int q3, int order, DiagramLibrary& lib = default_library()) {
    auto mu = LoopMeasure<T>::from_model(m);
    auto e = [&](int q) { return T(m.e.at(static_cast<std::size_t>(q))); };
    return omega3_from_correlators<T>(e(q1), e(q2), e(q3), order, mu, lib);
}

template <class T>
Series<T> omega1_from_correlators(const T& E, int order, const LoopMeasure<T>& mu, DiagramLibrary& lib = default_library()) {
    Series<T> s(order);
    for (const auto& [x, w] : mu.atoms) s += correlator<T>({{E, x}}, order, mu, lib) * w;
    return s;
}

// ---------------------------------------------------------------- genus-0 n-point recursion

/// Builds G_{|p1..pn|} at genus 0 from 2-point series by the algebraic recursion. `two_point(a, b)`
/// returns the series of G_{|ab|} for leg values a, b.
template <class T>
class NPointRecursion {
public:
    using TwoPoint = std::function<Series<T>(const T&, const T&)>;
    NPointRecursion(TwoPoint two_point, int order) : two_point_(std::move(two_point)), order_(order) {}

    Series<T> operator()(const std::vector<T>& p) {
        const std::size_t n = p.size();
        if (n == 0 || n % 2 != 0) return Series<T>(order_);
        auto key = p;
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        Series<T> out(order_);
        if (n == 2) {
            out = two_point_(p[0], p[1]);
        } else {
            T den2 = p[1] - p[n - 1];
            if (den2 == T(0)) throw std::domain_error("recursion denominators vanish");
            for (std::size_t k = 1; 2 * k + 2 <= n; ++k) {
                T den1 = p[2 * k] - p[0];
                if (den1 == T(0)) throw std::domain_error("recursion denominators vanish");
                // |p_{2k+2} .. p_n p_1| and |p_2 .. p_{2k+1}|   (1-based)
                std::vector<T> a(p.begin() + static_cast<std::ptrdiff_t>(2 * k + 1), p.end());
                a.push_back(p[0]);
                std::vector<T> b(p.begin() + 1, p.begin() + static_cast<std::ptrdiff_t>(2 * k + 1));
                // |p_{2k+1} .. p_n| and |p_1 .. p_{2k}|
                std::vector<T> c(p.begin() + static_cast<std::ptrdiff_t>(2 * k), p.end());
                std::vector<T> d(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(2 * k));
                Series<T> term = (*this)(a) * (*this)(b) - (*this)(c) * (*this)(d);
                out += term / T(den1 * den2);
            }
            // multiply by -lambda
            Series<T> shifted(order_);
            for (int v = 1; v <= order_; ++v) shifted[v] = -out[v - 1];
            out = shifted;
        }
        memo_.emplace(std::move(key), out);
        return out;
    }

private:
    TwoPoint two_point_;
    int order_;
    std::map<std::vector<T>, Series<T>> memo_;
};

template <class T>
Series<T> npoint_recursion(const std::vector<T>& labels, int order, const LoopMeasure<T>& mu,
                           DiagramLibrary& lib = default_library()) {
    NPointRecursion<T> rec([&](const T& a, const T& b) { return correlator<T>({{a, b}}, order, mu, lib); }, order);
    return rec(labels);
}

// ---------------------------------------------------------------- graph side vs exact forms

enum class OmegaTarget { Omega1, Omega2, Omega3 };

struct CoefficientComparison {
    int order = 0;
    double graph = 0;
    cplx exact{};
    double abs_err = 0, rel_err = 0;
};

struct PertExactReport {
    std::vector<CoefficientComparison> rows;
    double max_rel = 0;
};

/// Exact-form value at the curve for the given class indices (arguments eps_q).
inline cplx exact_form_value(const SpectralCurve& c, OmegaTarget t, const std::vector<int>& q) {
    auto eps = [&](int k) { return c.epsilon().at(static_cast<std::size_t>(k)); };
    switch (t) {
        case OmegaTarget::Omega1: return omega1_exact(c, eps(q.at(0)));
        case OmegaTarget::Omega2: {
            if (q.at(0) == q.at(1)) return omega2_coincident(c, eps(q[0]), eps(q[1]));
            return omega2_exact(c, eps(q[0]), eps(q[1]));
        }
        case OmegaTarget::Omega3: {
            int a = q.at(0), b = q.at(1), z = q.at(2);
            if (a == b && b == z) return omega3_coincident(c, eps(a), eps(b), eps(z));
            // the bracket is singular only at u = v; put a coinciding pair into (u, z)
            if (a == b) std::swap(b, z);
            return omega3_exact(c, eps(a), eps(b), eps(z));
        }
    }
    throw std::logic_error("unknown target");
}

/// Graph-side series for the target at the model's rational values.
inline Series<Rational> graph_form_series(const ModelSpec& m, OmegaTarget t, const std::vector<int>& q, int order,
                                          DiagramLibrary& lib = default_library()) {
    auto mu = LoopMeasure<Rational>::from_model(m);
    auto e = [&](int k) { return m.e.at(static_cast<std::size_t>(k)); };
    switch (t) {
        case OmegaTarget::Omega1: return omega1_from_correlators<Rational>(e(q.at(0)), order, mu, lib);
        case OmegaTarget::Omega2: return omega2_from_correlators<Rational>(e(q.at(0)), e(q.at(1)), order, mu, lib);
        case OmegaTarget::Omega3: return omega3_from_correlators<Rational>(e(q.at(0)), e(q.at(1)), e(q.at(2)), order, mu, lib);
    }
    throw std::logic_error("unknown target");
}

/// Taylor coefficients in lambda of the exact form, by contour quadrature with the curve solved
/// by continuation at every node.
inline std::vector<cplx> exact_form_coefficients(const ModelSpec& m, OmegaTarget t, const std::vector<int>& q, int order,
                                                 const ContourSpec& lambda_contour) {
    return cauchy_coefficients(
        [&](cplx lam) {
            SpectralCurve c = solve_curve(m, lam);
            return exact_form_value(c, t, q);
        },
        lambda_contour, order);
}

inline PertExactReport perturbative_vs_exact(const ModelSpec& m, OmegaTarget t, const std::vector<int>& q, int order,
                                             const ContourSpec& lambda_contour = {0.0, 0.02, 64},
                                             DiagramLibrary& lib = default_library()) {
    Series<Rational> g = graph_form_series(m, t, q, order, lib);
    auto c = exact_form_coefficients(m, t, q, order, lambda_contour);
    PertExactReport rep;
    for (int v = 0; v <= order; ++v) {
        CoefficientComparison row;
        row.order = v;
        row.graph = to_double(g[v]);
        row.exact = c[static_cast<std::size_t>(v)];
        row.abs_err = std::abs(row.exact - row.graph);
        row.rel_err = row.abs_err / std::max(std::abs(row.graph), 1e-300);
        if (row.graph == 0) row.rel_err = row.abs_err;
        rep.max_rel = std::max(rep.max_rel, row.rel_err);
        rep.rows.push_back(row);
    }
    return rep;
}

struct SqrtParityReport {
    std::vector<cplx> coefficients;      ///< Taylor coefficients in t = sqrt(lambda)
    double max_odd = 0;                  ///< largest odd coefficient of the full form
    double max_odd_half_sum = 0;         ///< same when only one member of each conjugate pair is summed
};

/// Omega_3 on lambda = t^2 as a function of t: odd powers of t must vanish for the full form;
/// with the ramification sum restricted to the branches continuing -e_i + i t sqrt(r_i/N) they do not.
inline SqrtParityReport omega3_sqrt_parity(const ModelSpec& m, const std::vector<int>& q, int max_t_order, double t_radius) {
    SqrtParityReport rep;
    ContourSpec spec{0.0, t_radius, 64};
    auto args = [&](const SpectralCurve& c) {
        int a = q.at(0), b = q.at(1), z = q.at(2);
        if (a == b) std::swap(b, z);
        return std::array<cplx, 3>{c.epsilon()[static_cast<std::size_t>(a)], c.epsilon()[static_cast<std::size_t>(b)],
                                   c.epsilon()[static_cast<std::size_t>(z)]};
    };
    rep.coefficients = cauchy_coefficients(
        [&](cplx t) {
            SpectralCurve c = solve_curve(m, t * t);
            auto x = args(c);
            return omega3_exact(c, x[0], x[1], x[2]);
        },
        spec, max_t_order);
    auto half = cauchy_coefficients(
        [&](cplx t) {
            SpectralCurve c = solve_curve(m, t * t);
            std::vector<cplx> chosen;
            for (int i = 0; i < m.d(); ++i) {
                cplx guess = -m.e[static_cast<std::size_t>(i)].get_d() +
                             cplx(0, 1) * t * std::sqrt(Rational(m.r[static_cast<std::size_t>(i)] / m.N).get_d());
                auto best = std::min_element(c.beta().begin(), c.beta().end(),
                                             [&](cplx a, cplx b) { return std::abs(a - guess) < std::abs(b - guess); });
                chosen.push_back(*best);
            }
            auto x = args(c);
            return omega3_exact(c, x[0], x[1], x[2], &chosen, true);
        },
        spec, max_t_order);
    for (int k = 1; k <= max_t_order; k += 2) {
        rep.max_odd = std::max(rep.max_odd, std::abs(rep.coefficients[static_cast<std::size_t>(k)]));
        rep.max_odd_half_sum = std::max(rep.max_odd_half_sum, std::abs(half[static_cast<std::size_t>(k)]));
    }
    return rep;
}

// ---------------------------------------------------------------- count table

struct CountRow {
    int order = 0;
    std::optional<Rational> omega1_enum, omega2_enum, omega3_enum;  ///< from enumeration
    Rational omega1_closed, omega2_closed, omega2_tr, omega2_btr;    ///< from exact d=1 series
    std::optional<double> omega3_closed;                              ///< contour extraction of the exact form
};

/// d=1, e=1/2 counts of diagrams contributing to Omega_q, Omega_{q1,q2}, Omega_{q1,q2,q3}.
/// Enumeration covers orders up to the given limits; the closed-form columns run to max_order.
inline std::vector<CountRow> count_table(int max_order, int omega1_enum_max = 4, int omega2_enum_max = 3,
                                         int omega3_enum_max = 2, bool omega3_closed = true,
                                         DiagramLibrary& lib = default_library()) {
    const Rational half(1, 2);
    LoopMeasure<Rational> mu;
    mu.atoms.emplace_back(half, Rational(1));
    std::vector<CountRow> rows(static_cast<std::size_t>(max_order) + 1);
    for (int v = 0; v <= max_order; ++v) rows[static_cast<std::size_t>(v)].order = v;
    if (omega1_enum_max >= 0) {
        auto s = counts_of(counting_series(BoundarySpec::from_lengths({2}), 0, std::min(omega1_enum_max, max_order), lib));
        for (std::size_t v = 0; v < s.size(); ++v) rows[v].omega1_enum = s[v];
    }
    if (omega2_enum_max >= 0) {
        auto s = counts_of(omega2_from_correlators<Rational>(half, half, std::min(omega2_enum_max, max_order), mu, lib));
        for (std::size_t v = 0; v < s.size(); ++v) rows[v].omega2_enum = s[v];
    }
    if (omega3_enum_max >= 0) {
        auto s = counts_of(omega3_from_correlators<Rational>(half, half, half, std::min(omega3_enum_max, max_order), mu, lib));
        for (std::size_t v = 0; v < s.size(); ++v) rows[v].omega3_enum = s[v];
    }
    D1Series d1(half, max_order);
    auto c1 = counts_of(d1.two_point);
    auto tr = counts_of(d1.omega2_tr);
    auto btr = counts_of(d1.omega2_blob);
    for (int v = 0; v <= max_order; ++v) {
        auto& r = rows[static_cast<std::size_t>(v)];
        r.omega1_closed = c1[static_cast<std::size_t>(v)];
        r.omega2_tr = tr[static_cast<std::size_t>(v)];
        r.omega2_btr = btr[static_cast<std::size_t>(v)];
        r.omega2_closed = r.omega2_tr + r.omega2_btr;
    }
    if (omega3_closed) {
        ModelSpec m = ModelSpec::single(half);
        auto c = exact_form_coefficients(m, OmegaTarget::Omega3, {0, 0, 0}, max_order, ContourSpec{0.0, 0.02, 64});
        for (int v = 0; v <= max_order; ++v)
            rows[static_cast<std::size_t>(v)].omega3_closed = (v % 2 ? -1.0 : 1.0) * c[static_cast<std::size_t>(v)].real();
    }
    return rows;
}

}  // namespace qkm
