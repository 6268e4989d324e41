#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qkm {

/// Truncated power series sum_{v<=order} c_v x^v over a field T.
/// Results of binary operations are truncated at the smaller order.
template <class T>
class Series {
public:
    Series() : coeffs_(1, T(0)) {}
    explicit Series(int order) : coeffs_(checked_length(order), T(0)) {}
    Series(std::vector<T> coeffs) : coeffs_(std::move(coeffs)) {
        if (coeffs_.empty()) throw std::invalid_argument("series needs at least one coefficient");
    }

    static Series constant(const T& c, int order) {
        Series s(order);
        s.coeffs_[0] = c;
        return s;
    }
    /// c0 + c1 x
    static Series linear(const T& c0, const T& c1, int order) {
        Series s(order);
        s.coeffs_[0] = c0;
        if (order >= 1) s.coeffs_[1] = c1;
        return s;
    }

    int order() const { return static_cast<int>(coeffs_.size()) - 1; }
    const T& operator[](int v) const { return coeffs_.at(static_cast<std::size_t>(v)); }
    T& operator[](int v) { return coeffs_.at(static_cast<std::size_t>(v)); }
    const std::vector<T>& coefficients() const { return coeffs_; }

    Series truncated(int order) const {
        if (order > this->order()) throw std::invalid_argument("cannot extend a truncated series");
        return Series(std::vector<T>(coeffs_.begin(), coeffs_.begin() + order + 1));
    }

    Series& operator+=(const Series& b) { return *this = *this + b; }
    Series& operator-=(const Series& b) { return *this = *this - b; }
    Series& operator*=(const Series& b) { return *this = *this * b; }
    Series& operator/=(const Series& b) { return *this = *this / b; }
    Series& operator*=(const T& c) {
        for (auto& x : coeffs_) x *= c;
        return *this;
    }

    friend Series operator+(const Series& a, const Series& b) {
        int n = std::min(a.order(), b.order());
        Series r(n);
        for (int v = 0; v <= n; ++v) r[v] = a[v] + b[v];
        return r;
    }
    friend Series operator-(const Series& a, const Series& b) {
        int n = std::min(a.order(), b.order());
        Series r(n);
        for (int v = 0; v <= n; ++v) r[v] = a[v] - b[v];
        return r;
    }
    friend Series operator-(const Series& a) {
        Series r(a.order());
        for (int v = 0; v <= a.order(); ++v) r[v] = -a[v];
        return r;
    }
    friend Series operator*(const Series& a, const Series& b) {
        int n = std::min(a.order(), b.order());
        Series r(n);
        for (int i = 0; i <= n; ++i) {
            if (a[i] == T(0)) continue;
            for (int j = 0; i + j <= n; ++j) r[i + j] += a[i] * b[j];
        }
        return r;
    }
    friend Series operator*(const T& c, Series a) { return a *= c; }
    friend Series operator*(Series a, const T& c) { return a *= c; }
    friend Series operator+(Series a, const T& c) {
        a[0] += c;
        return a;
    }
    friend Series operator+(const T& c, Series a) { return std::move(a) + c; }
    friend Series operator-(Series a, const T& c) {
        a[0] -= c;
        return a;
    }
    friend Series operator-(const T& c, const Series& a) { return -a + c; }

    /// 1/a; the constant term must be nonzero.
    Series inverse() const {
        if (coeffs_[0] == T(0)) throw std::domain_error("series not invertible");
        int n = order();
        Series r(n);
        T inv0 = T(1) / coeffs_[0];
        r[0] = inv0;
        for (int v = 1; v <= n; ++v) {
            T acc(0);
            for (int k = 1; k <= v; ++k) acc += coeffs_[k] * r[v - k];
            r[v] = -acc * inv0;
        }
        return r;
    }

    friend Series operator/(const Series& a, const Series& b) {
        int n = std::min(a.order(), b.order());
        return a.truncated(n) * b.truncated(n).inverse();
    }
    friend Series operator/(Series a, const T& c) {
        if (c == T(0)) throw std::domain_error("series not invertible");
        T inv = T(1) / c;
        return a *= inv;
    }

    Series derivative() const {
        int n = std::max(order() - 1, 0);
        Series r(n);
        for (int v = 1; v <= order(); ++v) r[v - 1] = coeffs_[v] * T(v);
        return r;
    }

    /// Divides by x^k; the first k coefficients must vanish. The order drops by k.
    Series shifted_down(int k) const {
        if (k > order()) throw std::invalid_argument("shift exceeds series order");
        for (int v = 0; v < k; ++v)
            if (coeffs_[v] != T(0)) throw std::domain_error("series not divisible by x^k");
        return Series(std::vector<T>(coeffs_.begin() + k, coeffs_.end()));
    }

    /// Square root whose constant term is the caller-supplied root of c0 (nonzero).
    Series sqrt_with_root(const T& root0) const {
        if (root0 * root0 != coeffs_[0]) throw std::invalid_argument("root0 is not a square root of c0");
        if (root0 == T(0)) throw std::domain_error("series square root at zero");
        int n = order();
        Series r(n);
        r[0] = root0;
        T half_inv = T(1) / (T(2) * root0);
        for (int v = 1; v <= n; ++v) {
            T acc = coeffs_[v];
            for (int k = 1; k < v; ++k) acc -= r[k] * r[v - k];
            r[v] = acc * half_inv;
        }
        return r;
    }

    /// Substitutes x -> c x.
    Series scaled_argument(const T& c) const {
        Series r(*this);
        T p(1);
        for (int v = 0; v <= order(); ++v) {
            r[v] *= p;
            p *= c;
        }
        return r;
    }

    friend bool operator==(const Series& a, const Series& b) { return a.coeffs_ == b.coeffs_; }

private:
    static std::size_t checked_length(int order) {
        if (order < 0) throw std::invalid_argument("negative series order");
        return static_cast<std::size_t>(order) + 1;
    }
    std::vector<T> coeffs_;
};

template <class T>
Series<T> pow(const Series<T>& s, int k) {
    if (k < 0) return pow(s.inverse(), -k);
    Series<T> r = Series<T>::constant(T(1), s.order());
    for (int i = 0; i < k; ++i) r *= s;
    return r;
}

}  // namespace qkm
