#include "pcw/dispersion.hpp"

#include <cmath>
#include <algorithm>
#include <sstream>

#include "pcw/error.hpp"

namespace pcw {

DispersionCurve::DispersionCurve(std::vector<DispersionPoint> points, double lattice_constant_nm,
                                 double effective_index, std::optional<std::pair<double, double>> gap)
    : points_(std::move(points)), lattice_nm_(lattice_constant_nm), n_eff_(effective_index)
{
    const std::size_t n = points_.size();
    require(n >= 4, ErrorKind::InsufficientData, "dispersion: need at least 4 points");
    require(lattice_nm_ > 0.0 && n_eff_ > 0.0, ErrorKind::InvalidArgument, "dispersion: bad scale parameters");
    for (std::size_t i = 1; i < n; ++i)
        require(points_[i].k > points_[i - 1].k, ErrorKind::InvalidArgument,
                "dispersion: k samples must be strictly increasing");
    require(std::abs(points_.back().k - 0.5) < 1e-12, ErrorKind::InvalidArgument,
            "dispersion: last k sample must be the zone boundary 0.5");
    require(points_.back().frequency > 0.0, ErrorKind::InvalidArgument, "dispersion: edge frequency must be > 0");

    const double edge = points_.back().frequency;
    const double first_step = points_[n - 2].frequency - edge;
    require(first_step != 0.0, ErrorKind::DegenerateInput, "dispersion: flat band at the zone boundary");
    above_ = first_step > 0.0;

    auto inside_gap = [&](double nu) { return !gap || (nu > gap->first && nu < gap->second); };
    segment_begin_ = n - 1;
    for (std::size_t j = n - 1; j-- > 0;) {
        double step = points_[j].frequency - points_[j + 1].frequency;
        bool monotone = above_ ? step > 0.0 : step < 0.0;
        if (!monotone || !inside_gap(points_[j].frequency))
            break;
        segment_begin_ = j;
    }

    point_ng_.assign(n, std::nullopt);
    std::vector<double> xs, ngs;
    for (std::size_t i = n - 2; i > segment_begin_; --i) {
        double dk = points_[i + 1].k - points_[i - 1].k;
        double dnu = std::abs(points_[i + 1].frequency - points_[i - 1].frequency);
        double ng = dk / dnu;
        point_ng_[i] = ng;
        xs.push_back(std::abs(points_[i].frequency - edge));
        ngs.push_back(ng);
    }
    if (xs.size() < 2) {
        std::ostringstream os;
        os << "dispersion: guided segment too short (" << (n - segment_begin_) << " points)";
        throw Error(ErrorKind::InsufficientData, os.str());
    }
    near_x_ = xs.front();
    near_ng_ = ngs.front();
    table_far_ = points_[segment_begin_ + 1].frequency;
    table_ = Pchip(xs, ngs);

    double edge_slope = std::abs(points_[n - 1].frequency - points_[n - 2].frequency)
                        / (points_[n - 1].k - points_[n - 2].k);
    // Quadratic edge: edge slope is half the central slope at the next point;
    // a straight band gives equal slopes.
    stationary_ = edge_slope < 0.75 / near_ng_;
}

bool DispersionCurve::in_propagating_domain(double nu) const
{
    double x = above_ ? nu - band_edge_frequency() : band_edge_frequency() - nu;
    double far = std::abs(table_far_ - band_edge_frequency());
    return x > 0.0 && x <= far * (1.0 + 1e-12);
}

double DispersionCurve::group_index(double nu) const
{
    if (!in_propagating_domain(nu)) {
        std::ostringstream os;
        os.precision(10);
        os << "group_index: frequency " << nu << " outside the guided segment (edge " << band_edge_frequency()
           << ", far end " << table_far_ << ")";
        throw Error(ErrorKind::OutOfDomain, os.str());
    }
    double x = std::abs(nu - band_edge_frequency());
    if (x <= near_x_)
        return stationary_ ? near_ng_ * std::sqrt(near_x_ / x) : near_ng_;
    return table_(std::min(x, table_.x_max()));
}

double DispersionCurve::primitive(double x) const
{
    auto near = [&](double v) { return stationary_ ? 2.0 * near_ng_ * std::sqrt(near_x_ * v) : near_ng_ * v; };
    if (x <= near_x_)
        return near(x);
    return near(near_x_) + table_.integral(near_x_, std::min(x, table_.x_max()));
}

double DispersionCurve::group_index_integral(double nu_a, double nu_b) const
{
    const double edge = band_edge_frequency();
    double far = std::abs(table_far_ - edge);
    auto to_x = [&](double nu) {
        double x = above_ ? nu - edge : edge - nu;
        return std::clamp(x, 0.0, far);
    };
    double value = primitive(to_x(nu_b)) - primitive(to_x(nu_a));
    return above_ ? value : -value;
}

std::vector<GroupIndexSample> DispersionCurve::group_index_table() const
{
    std::vector<GroupIndexSample> out;
    for (std::size_t i = 0; i < points_.size(); ++i)
        if (point_ng_[i])
            out.push_back({points_[i].frequency, *point_ng_[i]});
    return out;
}

} // namespace pcw
