#pragma once

#include <span>
#include <vector>

namespace pcw {

// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
// Preserves monotonicity of the data; integrates exactly.
class Pchip {
public:
    Pchip() = default;
    Pchip(std::vector<double> x, std::vector<double> y);

    double operator()(double x) const;
    double derivative(double x) const;
    // Exact integral of the interpolant over [a, b] (a, b inside the data range).
    double integral(double a, double b) const;

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    bool empty() const { return x_.empty(); }
    std::span<const double> x() const { return x_; }
    std::span<const double> y() const { return y_; }

private:
    std::size_t segment(double x) const;
    double antiderivative_in_segment(std::size_t i, double x) const;

    std::vector<double> x_, y_, d_;
};

} // namespace pcw
