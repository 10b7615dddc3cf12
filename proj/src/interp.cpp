#include "pcw/interp.hpp"

#include <algorithm>
#include <cmath>

#include "pcw/error.hpp"

namespace pcw {

namespace {

double end_slope(double h0, double h1, double d0, double d1)
{
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (std::signbit(s) != std::signbit(d0) || d0 == 0.0)
        return 0.0;
    if (std::signbit(d0) != std::signbit(d1) && std::abs(s) > 3.0 * std::abs(d0))
        return 3.0 * d0;
    return s;
}

} // namespace

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y))
{
    require(x_.size() == y_.size() && x_.size() >= 2, ErrorKind::InvalidArgument,
            "pchip: need at least two points of equal-length x/y");
    for (std::size_t i = 1; i < x_.size(); ++i)
        require(x_[i] > x_[i - 1], ErrorKind::InvalidArgument, "pchip: x must be strictly increasing");

    const std::size_t n = x_.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    d_.assign(n, 0.0);
    if (n == 2) {
        d_[0] = d_[1] = delta[0];
        return;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (delta[k - 1] * delta[k] <= 0.0) {
            d_[k] = 0.0;
            continue;
        }
        double w1 = 2.0 * h[k] + h[k - 1];
        double w2 = h[k] + 2.0 * h[k - 1];
        d_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
    d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

std::size_t Pchip::segment(double x) const
{
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(i, x_.size() - 2);
}

double Pchip::operator()(double x) const
{
    std::size_t i = segment(x);
    double h = x_[i + 1] - x_[i];
    double t = (x - x_[i]) / h;
    double t2 = t * t, t3 = t2 * t;
    return y_[i] * (2 * t3 - 3 * t2 + 1) + h * d_[i] * (t3 - 2 * t2 + t) + y_[i + 1] * (-2 * t3 + 3 * t2)
           + h * d_[i + 1] * (t3 - t2);
}

double Pchip::derivative(double x) const
{
    std::size_t i = segment(x);
    double h = x_[i + 1] - x_[i];
    double t = (x - x_[i]) / h;
    double t2 = t * t;
    return (y_[i] * (6 * t2 - 6 * t) + y_[i + 1] * (-6 * t2 + 6 * t)) / h + d_[i] * (3 * t2 - 4 * t + 1)
           + d_[i + 1] * (3 * t2 - 2 * t);
}

double Pchip::antiderivative_in_segment(std::size_t i, double x) const
{
    double h = x_[i + 1] - x_[i];
    double t = (x - x_[i]) / h;
    double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    double a00 = 0.5 * t4 - t3 + t;
    double a10 = 0.25 * t4 - 2.0 * t3 / 3.0 + 0.5 * t2;
    double a01 = -0.5 * t4 + t3;
    double a11 = 0.25 * t4 - t3 / 3.0;
    return h * (y_[i] * a00 + h * d_[i] * a10 + y_[i + 1] * a01 + h * d_[i + 1] * a11);
}

double Pchip::integral(double a, double b) const
{
    if (a == b)
        return 0.0;
    if (a > b)
        return -integral(b, a);
    std::size_t ia = segment(a), ib = segment(b);
    if (ia == ib)
        return antiderivative_in_segment(ia, b) - antiderivative_in_segment(ia, a);
    double total = antiderivative_in_segment(ia, x_[ia + 1]) - antiderivative_in_segment(ia, a);
    for (std::size_t i = ia + 1; i < ib; ++i)
        total += antiderivative_in_segment(i, x_[i + 1]);
    total += antiderivative_in_segment(ib, b);
    return total;
}

} // namespace pcw
