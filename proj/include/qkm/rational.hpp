#pragma once

#include <gmpxx.h>

#include <stdexcept>
#include <string>
#include <string_view>

namespace qkm {

/// Exact rational number. GMP keeps it canonical (lowest terms, positive denominator)
/// as long as every construction goes through canonicalize().
using Rational = mpq_class;

inline Rational make_rational(long num, long den = 1) {
    if (den == 0) throw std::domain_error("rational with zero denominator");
    Rational q(num, den);
    q.canonicalize();
    return q;
}

/// Parses "a", "a/b" or a finite decimal such as "0.45" into an exact rational.
inline Rational parse_rational(std::string_view text) {
    std::string s(text);
    if (s.empty()) throw std::invalid_argument("empty rational literal");
    if (auto dot = s.find('.'); dot != std::string::npos) {
        if (s.find('/') != std::string::npos) throw std::invalid_argument("bad rational literal: " + s);
        std::string digits = s.substr(0, dot) + s.substr(dot + 1);
        std::size_t frac = s.size() - dot - 1;
        Rational q;
        if (q.get_num().set_str(digits, 10) != 0) throw std::invalid_argument("bad rational literal: " + s);
        mpz_class den;
        mpz_ui_pow_ui(den.get_mpz_t(), 10, frac);
        q.get_den() = den;
        q.canonicalize();
        return q;
    }
    Rational q;
    if (q.set_str(s, 10) != 0) throw std::invalid_argument("bad rational literal: " + s);
    if (q.get_den() == 0) throw std::domain_error("rational with zero denominator");
    q.canonicalize();
    return q;
}

inline std::string to_string(const Rational& q) { return q.get_str(); }

inline double to_double(const Rational& q) { return q.get_d(); }

inline Rational pow(const Rational& base, int exponent) {
    Rational result = 1;
    Rational b = exponent < 0 ? Rational(1 / base) : base;
    for (int k = exponent < 0 ? -exponent : exponent; k > 0; --k) result *= b;
    return result;
}

}  // namespace qkm
