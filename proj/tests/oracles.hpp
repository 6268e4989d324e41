#pragma once

#include <qkm/model.hpp>
#include <qkm/rational.hpp>
#include <qkm/series.hpp>

#include <random>
#include <vector>

// Hand-written low-order expansions of the genus-zero correlators and free energy, with the
// normalized sum (1/N) sum_k f(E_k) taken as sum over atoms of weight r_k/N.
namespace qkm::oracle {

using Q = Rational;

/// Positive rational with small denominator.
inline Q random_rational(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> num(1, 29), den(1, 7);
    return Q(num(rng), den(rng));
}

/// Random model with distinct values and integer multiplicities.
inline ModelSpec random_model(std::mt19937_64& rng, int d) {
    std::uniform_int_distribution<int> mult(1, 3);
    ModelSpec m;
    while (m.d() < d) {
        Q e = random_rational(rng);
        e.canonicalize();
        bool fresh = true;
        for (const auto& x : m.e) fresh = fresh && x != e;
        if (!fresh) continue;
        m.e.push_back(e);
        m.r.push_back(Q(mult(rng)));
    }
    m.N = 0;
    for (const auto& r : m.r) m.N += r;
    return m;
}

template <class F>
Q avg1(const LoopMeasure<Q>& mu, F&& f) {
    Q s = 0;
    for (const auto& [e, w] : mu.atoms) s += w * Q(f(e));
    return s;
}

template <class F>
Q avg2(const LoopMeasure<Q>& mu, F&& f) {
    return avg1(mu, [&](const Q& k) -> Q { return avg1(mu, [&](const Q& l) { return f(k, l); }); });
}

/// Two-point function |ab| through order 2.
inline Series<Q> two_point(const Q& a, const Q& b, const LoopMeasure<Q>& mu) {
    Series<Q> s(2);
    Q ab = a + b;
    s[0] = 1 / ab;
    s[1] = -avg1(mu, [&](const Q& k) -> Q { return 1 / (a + k) + 1 / (b + k); }) / (ab * ab);
    s[2] = avg2(mu,
                [&](const Q& k, const Q& l) -> Q {
                    return 1 / ((a + k) * (a + k) * (a + l)) + 2 / ((a + k) * (b + l) * ab) + 1 / ((b + k) * (b + k) * (b + l)) +
                           1 / ((a + k) * (a + k) * (k + l)) + 1 / ((b + k) * (b + k) * (k + l)) + 1 / ((a + k) * (a + l) * ab) +
                           1 / ((b + k) * (b + l) * ab) + 1 / ((a + k) * (b + l) * (k + l));
                }) /
           (ab * ab);
    return s;
}

/// Four-point function |abcd| through order 2.
inline Series<Q> four_point(const Q& a, const Q& b, const Q& c, const Q& d, const LoopMeasure<Q>& mu) {
    Series<Q> s(2);
    Q cyc = (a + b) * (b + c) * (c + d) * (d + a);
    s[1] = -1 / cyc;
    s[2] = avg1(mu,
                [&](const Q& k) -> Q {
                    return 1 / ((a + k) * (a + b)) + 1 / ((a + k) * (a + d)) + 1 / ((b + k) * (b + c)) + 1 / ((b + k) * (b + a)) +
                           1 / ((c + k) * (c + d)) + 1 / ((c + k) * (c + b)) + 1 / ((d + k) * (d + a)) + 1 / ((d + k) * (d + c)) +
                           1 / ((b + k) * (d + k)) + 1 / ((a + k) * (c + k));
                }) /
           cyc;
    return s;
}

/// (2+2)-point function |ab|cd| through order 2.
inline Series<Q> two_two_point(const Q& a, const Q& b, const Q& c, const Q& d) {
    Series<Q> s(2);
    Q pre = 1 / ((a + b) * (a + b) * (c + d) * (c + d));
    s[2] = pre * (1 / ((a + c) * (a + c)) + 1 / ((a + d) * (a + d)) + 1 / ((b + c) * (b + c)) + 1 / ((b + d) * (b + d)) +
                  1 / ((a + c) * (b + d)) + 1 / ((a + d) * (b + c)));
    return s;
}

/// Genus-zero free energy through order 2, without the order-zero log term.
inline Series<Q> free_energy(const LoopMeasure<Q>& mu) {
    Series<Q> s(2);
    s[1] = -avg1(mu, [&](const Q& k) -> Q { return avg2(mu, [&](const Q& l, const Q& m) -> Q { return 1 / ((k + l) * (k + m)); }); }) / 2;
    Q melon_free = 0, melon = 0;
    for (const auto& [j, wj] : mu.atoms)
        for (const auto& [k, wk] : mu.atoms)
            for (const auto& [l, wl] : mu.atoms)
                for (const auto& [m, wm] : mu.atoms) {
                    Q w = wj * wk * wl * wm;
                    melon_free += w / ((j + m) * (j + k) * (j + k)) * (1 / (j + l) + 1 / (k + l));
                    melon += w / ((j + k) * (k + l) * (l + m) * (m + j));
                }
    s[2] = melon_free / 2 + melon / 8;
    return s;
}

/// Rooted planar quadrangulations with v faces: 2 3^v C_v / (v+2).
inline Q rooted_quadrangulations(int v) {
    mpz_class binom;
    mpz_bin_uiui(binom.get_mpz_t(), static_cast<unsigned long>(2 * v), static_cast<unsigned long>(v));
    Q catalan = Q(binom) / (v + 1);
    return 2 * pow(Q(3), v) * catalan / (v + 2);
}

}  // namespace qkm::oracle
