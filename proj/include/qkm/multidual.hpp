#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <type_traits>

namespace qkm {

namespace detail {

constexpr int binomial(int n, int k) {
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return static_cast<int>(r);
}

/// Exponent tuples of total degree <= Order in graded order, plus a product table.
template <int Vars, int Order>
struct MonomialTable {
    static constexpr int size = binomial(Vars + Order, Order);
    std::array<std::array<int, Vars>, size> exps{};
    std::array<int, size> degree{};
    std::array<std::array<int, size>, size> product{};

    constexpr MonomialTable() {
        int n = 0;
        for (int deg = 0; deg <= Order; ++deg) {
            std::array<int, Vars> e{};
            fill(e, 0, deg, n);
        }
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j) {
                product[i][j] = -1;
                if (degree[i] + degree[j] > Order) continue;
                std::array<int, Vars> s{};
                for (int v = 0; v < Vars; ++v) s[v] = exps[i][v] + exps[j][v];
                product[i][j] = index_of(s);
            }
    }

    constexpr int index_of(const std::array<int, Vars>& e) const {
        for (int k = 0; k < size; ++k)
            if (exps[k] == e) return k;
        return -1;
    }

private:
    constexpr void fill(std::array<int, Vars>& e, int var, int remaining, int& n) {
        if (var == Vars - 1) {
            e[var] = remaining;
            int deg = 0;
            for (int v = 0; v < Vars; ++v) deg += e[v];
            exps[n] = e;
            degree[n] = deg;
            ++n;
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            e[var] = k;
            fill(e, var + 1, remaining - k, n);
        }
    }
};

}  // namespace detail

/// Truncated multivariate Taylor polynomial in Vars infinitesimals, keeping all monomials
/// of total degree <= Order. Works over any field (exact rationals, complex doubles).
template <class T, int Vars, int Order>
class MultiDual {
    static_assert(Vars >= 1 && Order >= 1);
    static constexpr detail::MonomialTable<Vars, Order> table_{};

public:
    static constexpr int size = detail::MonomialTable<Vars, Order>::size;
    using Exponents = std::array<int, Vars>;

    MultiDual() { c_.fill(T(0)); }
    MultiDual(const T& value) {
        c_.fill(T(0));
        c_[0] = value;
    }
    template <class U>
        requires(std::is_arithmetic_v<U>)
    MultiDual(U value) : MultiDual(T(value)) {}

    /// value + (direction infinitesimal)
    static MultiDual variable(const T& value, int direction) {
        MultiDual x(value);
        Exponents e{};
        e.at(static_cast<std::size_t>(direction)) = 1;
        x.c_[table_.index_of(e)] = T(1);
        return x;
    }

    const T& value() const { return c_[0]; }
    const T& coefficient(const Exponents& e) const {
        int k = table_.index_of(e);
        if (k < 0) throw std::out_of_range("monomial beyond truncation order");
        return c_[k];
    }
    T& coefficient(const Exponents& e) {
        int k = table_.index_of(e);
        if (k < 0) throw std::out_of_range("monomial beyond truncation order");
        return c_[k];
    }
    /// Partial derivative d^{|e|}/dx^e at the expansion point.
    T derivative(const Exponents& e) const {
        T f = coefficient(e);
        for (int v = 0; v < Vars; ++v)
            for (int k = 2; k <= e[v]; ++k) f *= T(k);
        return f;
    }
    /// First derivative along one direction.
    T derivative(int direction) const {
        Exponents e{};
        e.at(static_cast<std::size_t>(direction)) = 1;
        return derivative(e);
    }

    MultiDual& operator+=(const MultiDual& b) {
        for (int k = 0; k < size; ++k) c_[k] += b.c_[k];
        return *this;
    }
    MultiDual& operator-=(const MultiDual& b) {
        for (int k = 0; k < size; ++k) c_[k] -= b.c_[k];
        return *this;
    }
    MultiDual& operator*=(const MultiDual& b) { return *this = *this * b; }
    MultiDual& operator/=(const MultiDual& b) { return *this = *this / b; }

    friend MultiDual operator+(MultiDual a, const MultiDual& b) { return a += b; }
    friend MultiDual operator-(MultiDual a, const MultiDual& b) { return a -= b; }
    friend MultiDual operator-(const MultiDual& a) {
        MultiDual r;
        for (int k = 0; k < size; ++k) r.c_[k] = -a.c_[k];
        return r;
    }
    friend MultiDual operator*(const MultiDual& a, const MultiDual& b) {
        MultiDual r;
        for (int i = 0; i < size; ++i) {
            if (a.c_[i] == T(0)) continue;
            for (int j = 0; j < size; ++j) {
                int k = table_.product[i][j];
                if (k >= 0) r.c_[k] += a.c_[i] * b.c_[j];
            }
        }
        return r;
    }

    MultiDual reciprocal() const {
        if (c_[0] == T(0)) throw std::domain_error("derivative singularity");
        T inv0 = T(1) / c_[0];
        MultiDual h = *this;
        h.c_[0] = T(0);
        h = h * MultiDual(-inv0);
        // 1/(a0 + h) = (1/a0) sum_k (-h/a0)^k, and h^(Order+1) = 0
        MultiDual term(T(1)), sum(T(1));
        for (int k = 1; k <= Order; ++k) {
            term = term * h;
            sum += term;
        }
        return sum * MultiDual(inv0);
    }
    friend MultiDual operator/(const MultiDual& a, const MultiDual& b) { return a * b.reciprocal(); }

    friend bool operator==(const MultiDual& a, const MultiDual& b) { return a.c_ == b.c_; }

private:
    std::array<T, size> c_;
};

/// First-order dual number in one direction: the workhorse for exact d/dE.
template <class T>
using Dual = MultiDual<T, 1, 1>;

}  // namespace qkm
