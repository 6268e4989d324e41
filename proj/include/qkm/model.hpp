#pragma once

#include <qkm/rational.hpp>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qkm {

/// Free-theory data: d distinct spectral values e_k with multiplicities r_k out of N,
/// and the quartic coupling.
struct ModelSpec {
    std::vector<Rational> e;
    std::vector<Rational> r;
    Rational N = 1;
    double lambda = 0.0;

    int d() const { return static_cast<int>(e.size()); }

    void validate() const {
        if (e.empty()) throw std::invalid_argument("model needs at least one spectral value");
        if (r.size() != e.size()) throw std::invalid_argument("model needs one multiplicity per spectral value");
        if (N <= 0) throw std::invalid_argument("N must be positive");
        for (std::size_t k = 0; k < e.size(); ++k) {
            if (e[k] <= 0) throw std::invalid_argument("spectral values must be positive");
            if (r[k] <= 0) throw std::invalid_argument("multiplicities must be positive");
            if (k > 0 && !(e[k - 1] < e[k])) throw std::invalid_argument("spectral values must be strictly increasing");
        }
    }

    /// d=1 model with r_1 = N = 1.
    static ModelSpec single(const Rational& e1) { return ModelSpec{{e1}, {Rational(1)}, Rational(1), 0.0}; }

    std::vector<double> e_double() const {
        std::vector<double> out;
        for (const auto& x : e) out.push_back(x.get_d());
        return out;
    }
    /// r_k/N as doubles
    std::vector<double> weight_double() const {
        std::vector<double> out;
        for (const auto& x : r) out.push_back(Rational(x / N).get_d());
        return out;
    }
};

/// Discrete measure used for every loop sum (1/N) sum_k f(E_k): atoms (value, weight).
template <class T>
struct LoopMeasure {
    std::vector<std::pair<T, T>> atoms;

    static LoopMeasure from_model(const ModelSpec& m) {
        LoopMeasure mu;
        for (int k = 0; k < m.d(); ++k) mu.atoms.emplace_back(T(m.e[k]), T(Rational(m.r[k] / m.N)));
        return mu;
    }
};

}  // namespace qkm
