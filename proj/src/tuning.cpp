#include "pcw/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "pcw/error.hpp"

namespace pcw {

double TuningCurve::operator()(double t) const
{
    return coefficients[0] + t * (coefficients[1] + t * coefficients[2]);
}

bool TuningCurve::in_domain(double t) const
{
    return t >= t_min && t <= t_max;
}

void TuningCurve::validate() const
{
    require(t_min < t_max, ErrorKind::InvalidArgument, "tuning curve: need t_min < t_max");
    for (double c : coefficients)
        require(std::isfinite(c), ErrorKind::InvalidArgument, "tuning curve: coefficients must be finite");
}

TuningCurve fit_tuning(std::span<const double> temperatures_k, std::span<const double> wavelengths_nm,
                       std::string label)
{
    require(temperatures_k.size() == wavelengths_nm.size(), ErrorKind::InvalidArgument,
            "fit_tuning: temperature and wavelength lengths differ");
    for (std::size_t i = 0; i < temperatures_k.size(); ++i)
        require(std::isfinite(temperatures_k[i]) && std::isfinite(wavelengths_nm[i]), ErrorKind::InvalidArgument,
                "fit_tuning: values must be finite");
    const std::set<double> distinct(temperatures_k.begin(), temperatures_k.end());
    if (distinct.size() < 3) {
        std::ostringstream os;
        os << "fit_tuning: a quadratic needs 3 distinct temperatures, got " << distinct.size() << " in "
           << temperatures_k.size() << " point(s)";
        throw Error(ErrorKind::RankDeficient, os.str());
    }

    // Centered and scaled abscissa keeps the normal matrix well conditioned.
    const double lo = *distinct.begin(), hi = *distinct.rbegin();
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    const auto n = static_cast<Eigen::Index>(temperatures_k.size());
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double u = (temperatures_k[static_cast<std::size_t>(i)] - mid) / half;
        X.row(i) << 1.0, u, u * u;
        y[i] = wavelengths_nm[static_cast<std::size_t>(i)];
    }
    Eigen::Vector3d b = X.colPivHouseholderQr().solve(y);
    // Back to powers of T.
    const double s = 1.0 / half;
    TuningCurve c;
    c.label = std::move(label);
    c.coefficients[2] = b[2] * s * s;
    c.coefficients[1] = b[1] * s - 2.0 * b[2] * s * s * mid;
    c.coefficients[0] = b[0] - b[1] * s * mid + b[2] * s * s * mid * mid;
    c.t_min = lo;
    c.t_max = hi;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double r = c(temperatures_k[static_cast<std::size_t>(i)]) - y[i];
        ss += r * r;
    }
    c.fit_rms = std::sqrt(ss / static_cast<double>(n));
    return c;
}

ShiftRate shift_rate(const TuningCurve& curve, double t)
{
    curve.validate();
    return {curve.coefficients[1] + 2.0 * curve.coefficients[2] * t, !curve.in_domain(t)};
}

DetuningSeries detuning_series(const TuningCurve& qd, const TuningCurve& edge, std::span<const double> temperatures_k)
{
    qd.validate();
    edge.validate();
    DetuningSeries out;
    for (double t : temperatures_k) {
        DetuningEntry e;
        e.temperature_k = t;
        e.qd_wavelength_nm = qd(t);
        e.band_edge_wavelength_nm = edge(t);
        e.detuning_nm = e.qd_wavelength_nm - e.band_edge_wavelength_nm;
        e.extrapolated = !qd.in_domain(t) || !edge.in_domain(t);
        out.entries.push_back(e);
    }
    return out;
}

Resonance resonance_temperature(const TuningCurve& qd, const TuningCurve& edge)
{
    qd.validate();
    edge.validate();
    const double lo = std::max(qd.t_min, edge.t_min);
    const double hi = std::min(qd.t_max, edge.t_max);
    if (!(lo <= hi)) {
        std::ostringstream os;
        os << "resonance_temperature: domains of '" << qd.label << "' and '" << edge.label << "' do not overlap";
        throw Error(ErrorKind::NoCrossing, os.str());
    }
    // Difference in the centered variable u = T - mid; symmetric in the argument order up to sign.
    const double mid = 0.5 * (lo + hi);
    auto centered = [&](const TuningCurve& c) {
        const auto& k = c.coefficients;
        return std::array<double, 3>{c(mid), k[1] + 2.0 * k[2] * mid, k[2]};
    };
    const auto p = centered(qd), q = centered(edge);
    const double a = p[2] - q[2], b = p[1] - q[1], c0 = p[0] - q[0];
    const double span = std::max(hi - mid, 1.0);
    const double scale = std::max({std::abs(p[0]), std::abs(q[0]), 1.0});
    const double tol = 1e-12 * scale;

    if (std::abs(c0) <= tol && std::abs(b) * span <= tol && std::abs(a) * span * span <= tol)
        return {lo, std::nullopt, true};

    std::vector<double> roots;
    if (std::abs(a) * span * span <= tol) {
        if (b != 0.0)
            roots.push_back(-c0 / b);
    } else {
        const double disc = b * b - 4.0 * a * c0;
        if (disc >= 0.0) {
            const double qv = -0.5 * (b + std::copysign(std::sqrt(disc), b));
            if (qv != 0.0) {
                roots.push_back(qv / a);
                roots.push_back(c0 / qv);
            } else {
                roots.push_back(0.0);
            }
        }
    }
    const double slack = 1e-9 * std::max(1.0, hi - lo);
    std::vector<double> inside;
    for (double u : roots) {
        double t = u + mid;
        if (t >= lo - slack && t <= hi + slack)
            inside.push_back(std::clamp(t, lo, hi));
    }
    std::sort(inside.begin(), inside.end());
    if (inside.empty()) {
        std::ostringstream os;
        os << "resonance_temperature: '" << qd.label << "' and '" << edge.label << "' do not cross within [" << lo
           << ", " << hi << "] K";
        throw Error(ErrorKind::NoCrossing, os.str());
    }
    Resonance r;
    r.temperature_k = inside.front();
    if (inside.size() > 1)
        r.second_root_k = inside[1];
    return r;
}

} // namespace pcw
