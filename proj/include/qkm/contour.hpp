#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkm {

using cplx = std::complex<double>;

struct ContourSpec {
    cplx center{0.0, 0.0};
    double radius = 0.05;
    int node_count = 64;

    void validate() const {
        if (!(radius > 0.0)) throw std::invalid_argument("contour radius must be positive");
        if (node_count < 8 || (node_count & (node_count - 1)) != 0)
            throw std::invalid_argument("contour node count must be a power of two >= 8");
    }
    cplx node(int j) const {
        double theta = 2.0 * std::numbers::pi * j / node_count;
        return center + radius * std::polar(1.0, theta);
    }
};

/// Error carrying the index of the quadrature node at which the integrand failed.
class ContourNodeError : public std::runtime_error {
public:
    ContourNodeError(int node, const std::string& what)
        : std::runtime_error("contour node " + std::to_string(node) + ": " + what), node_(node) {}
    int node() const { return node_; }

private:
    int node_;
};

namespace detail {
template <class F>
std::vector<cplx> sample_contour(F&& f, const ContourSpec& spec) {
    spec.validate();
    std::vector<cplx> values(static_cast<std::size_t>(spec.node_count));
    for (int j = 0; j < spec.node_count; ++j) {
        cplx w;
        try {
            w = f(spec.node(j));
        } catch (const std::exception& ex) {
            throw ContourNodeError(j, ex.what());
        }
        if (!std::isfinite(w.real()) || !std::isfinite(w.imag()))
            throw ContourNodeError(j, "non-finite value at z=" + std::to_string(spec.node(j).real()) + "+" +
                                          std::to_string(spec.node(j).imag()) + "i");
        values[static_cast<std::size_t>(j)] = w;
    }
    return values;
}
}  // namespace detail

/// Taylor coefficients c_0..c_max of f about spec.center by the trapezoidal rule on a circle.
/// Aliasing error is O(radius^node_count); rounding error is roughly eps*max|f|/radius^v.
template <class F>
std::vector<cplx> cauchy_coefficients(F&& f, const ContourSpec& spec, int max_order) {
    if (max_order < 0 || max_order >= spec.node_count) throw std::invalid_argument("bad coefficient order");
    auto values = detail::sample_contour(f, spec);
    std::vector<cplx> c(static_cast<std::size_t>(max_order) + 1);
    for (int v = 0; v <= max_order; ++v) {
        cplx acc{};
        for (int j = 0; j < spec.node_count; ++j) {
            double theta = 2.0 * std::numbers::pi * j / spec.node_count;
            acc += values[static_cast<std::size_t>(j)] * std::polar(1.0, -v * theta);
        }
        c[static_cast<std::size_t>(v)] = acc / (spec.node_count * std::pow(spec.radius, v));
    }
    return c;
}

/// (1/2 pi i) times the contour integral of f around the circle; spectrally accurate when f is
/// analytic on an annulus around it.
template <class F>
cplx contour_residue(F&& f, const ContourSpec& spec) {
    auto values = detail::sample_contour(f, spec);
    cplx acc{};
    for (int j = 0; j < spec.node_count; ++j) acc += values[static_cast<std::size_t>(j)] * (spec.node(j) - spec.center);
    return acc / static_cast<double>(spec.node_count);
}

/// Mean of f over the circle, i.e. the value at the center of a function analytic inside.
template <class F>
cplx contour_mean(F&& f, const ContourSpec& spec) {
    auto values = detail::sample_contour(f, spec);
    cplx acc{};
    for (const auto& w : values) acc += w;
    return acc / static_cast<double>(spec.node_count);
}

}  // namespace qkm
