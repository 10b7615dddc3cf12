#include "pcw/beta_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "pcw/emission_model.hpp"
#include "pcw/error.hpp"
#include "pcw/optim.hpp"

namespace pcw {

BetaResult extract_beta(const RateVsDetuning& series, double gamma_0)
{
    require(gamma_0 > 0.0, ErrorKind::InvalidArgument, "extract_beta: gamma_0 must be > 0");
    int converged = 0, in_gap = 0;
    double res = -std::numeric_limits<double>::infinity();
    double nonres = std::numeric_limits<double>::infinity();
    for (const auto& p : series.points) {
        if (!p.converged)
            continue;
        require(std::isfinite(p.gamma_tot) && p.gamma_tot >= 0.0, ErrorKind::InvalidArgument,
                "extract_beta: rates must be finite and >= 0");
        ++converged;
        res = std::max(res, p.gamma_tot);
        if (p.detuning_nm > 0.0) {
            ++in_gap;
            nonres = std::min(nonres, p.gamma_tot);
        }
    }
    if (converged < 3) {
        std::ostringstream os;
        os << "extract_beta: '" << series.label << "' has " << converged << " converged point(s), need 3";
        throw Error(ErrorKind::InsufficientData, os.str());
    }
    if (in_gap == 0) {
        std::ostringstream os;
        os << "extract_beta: '" << series.label << "' has no converged point with positive detuning (in the gap)";
        throw Error(ErrorKind::InsufficientData, os.str());
    }
    BetaResult r;
    r.gamma_res = res;
    r.gamma_nonres = nonres;
    r.beta = beta_factor(res, nonres);
    r.purcell = purcell_factor(res, gamma_0);
    r.n_points_in_gap = in_gap;
    return r;
}

namespace {

struct LinearFit {
    double scale = 0.0, background = 0.0, chi_square = std::numeric_limits<double>::infinity();
};

// Minimizes Σ w (s·b + g - y)² over s, g >= 0.
LinearFit weighted_linear(const std::vector<double>& b, const std::vector<double>& y, const std::vector<double>& w)
{
    double sw = 0, sb = 0, sy = 0, sbb = 0, sby = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        sw += w[i];
        sb += w[i] * b[i];
        sy += w[i] * y[i];
        sbb += w[i] * b[i] * b[i];
        sby += w[i] * b[i] * y[i];
    }
    auto chi = [&](double s, double g) {
        double c = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            double r = s * b[i] + g - y[i];
            c += w[i] * r * r;
        }
        return c;
    };
    LinearFit best;
    auto consider = [&](double s, double g) {
        if (!(s >= 0.0 && g >= 0.0))
            return;
        double c = chi(s, g);
        if (c < best.chi_square)
            best = {s, g, c};
    };
    const double det = sw * sbb - sb * sb;
    if (det > 1e-14 * sw * sbb)
        consider((sw * sby - sb * sy) / det, (sbb * sy - sb * sby) / det);
    consider(0.0, std::max(sy / sw, 0.0));
    if (sbb > 0.0)
        consider(std::max(sby / sbb, 0.0), 0.0);
    return best;
}

} // namespace

RateModelFit fit_rate_model(const RateVsDetuning& series, const DispersionCurve& curve, double gamma_0,
                            const RateModelFitOptions& options)
{
    require(gamma_0 > 0.0, ErrorKind::InvalidArgument, "fit_rate_model: gamma_0 must be > 0");
    require(options.min_broadening > 0.0 && options.max_broadening > options.min_broadening && options.grid_points >= 2,
            ErrorKind::InvalidArgument, "fit_rate_model: bad broadening grid");
    std::vector<double> nu, y, w;
    bool below = false, above = false;
    const double edge_nm = curve.band_edge_wavelength_nm();
    for (const auto& p : series.points) {
        if (!p.converged)
            continue;
        require(p.sigma > 0.0 && std::isfinite(p.sigma), ErrorKind::InvalidArgument,
                "fit_rate_model: every converged point needs sigma > 0");
        const double lambda = edge_nm + p.detuning_nm;
        require(lambda > 0.0, ErrorKind::InvalidArgument, "fit_rate_model: detuning puts the wavelength below zero");
        nu.push_back(curve.frequency_at_wavelength(lambda));
        y.push_back(p.gamma_tot);
        w.push_back(1.0 / (p.sigma * p.sigma));
        below = below || p.detuning_nm < 0.0;
        above = above || p.detuning_nm > 0.0;
    }
    if (nu.size() < 5) {
        std::ostringstream os;
        os << "fit_rate_model: '" << series.label << "' has " << nu.size() << " converged point(s), need 5";
        throw Error(ErrorKind::InsufficientData, os.str());
    }
    if (!below || !above)
        throw Error(ErrorKind::InsufficientData,
                    "fit_rate_model: detuning span covers only one side of the band edge");

    const BroadenedDensity density(curve, options.density_cells);
    const double unit = gamma_0 / curve.effective_index(); // C·unit·B + Γ_bg
    std::vector<double> b(nu.size());
    auto profile = [&](double fwhm) {
        density.evaluate(nu, fwhm, b, Execution::serial);
        return weighted_linear(b, y, w);
    };

    RateModelFit out;
    out.points_used = static_cast<int>(nu.size());
    auto finish = [&](double fwhm, bool converged, int free) {
        LinearFit lf = profile(fwhm);
        out.broadening_fwhm = fwhm;
        out.coupling_scale = lf.scale / unit;
        out.gamma_bg = lf.background;
        out.chi_square = lf.chi_square;
        const int dof = out.points_used - free;
        out.reduced_residual = dof > 0 ? lf.chi_square / dof : lf.chi_square;
        out.converged = converged && std::isfinite(lf.chi_square);
        if (!out.converged && out.diagnostics.empty())
            out.diagnostics = "no feasible (C, gamma_bg) >= 0 for this series";
        return out;
    };
    if (options.fixed_broadening) {
        require(*options.fixed_broadening > 0.0, ErrorKind::InvalidArgument,
                "fit_rate_model: fixed broadening must be > 0");
        return finish(*options.fixed_broadening, true, 2);
    }

    const double l0 = std::log(options.min_broadening), l1 = std::log(options.max_broadening);
    const double dl = (l1 - l0) / (options.grid_points - 1);
    double best_l = l0, best_c = std::numeric_limits<double>::infinity();
    for (int i = 0; i < options.grid_points; ++i) {
        double l = l0 + dl * i;
        double c = profile(std::exp(l)).chi_square;
        if (c < best_c) {
            best_c = c;
            best_l = l;
        }
    }
    auto objective = [&](const Eigen::VectorXd& x) {
        if (x[0] < l0 - 5.0 || x[0] > l1 + 5.0)
            return std::numeric_limits<double>::infinity();
        return profile(std::exp(x[0])).chi_square;
    };
    Eigen::VectorXd x0(1), step(1);
    x0 << best_l;
    step << dl;
    auto r = optim::nelder_mead(objective, x0, step, {2000, 1e-14, 1e-12, 1e-10, 2});
    const double l = r.value <= best_c ? r.x[0] : best_l;
    if (!r.converged)
        out.diagnostics = "simplex on the broadening did not converge";
    return finish(std::exp(l), r.converged, 3);
}

MultiDotReport multi_dot_report(std::span<const RateVsDetuning> series, double gamma_0)
{
    MultiDotReport report;
    for (const auto& s : series) {
        DotReport d;
        d.label = s.label;
        d.points = static_cast<int>(s.points.size());
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
        int in_gap = 0;
        for (const auto& p : s.points) {
            if (!p.converged)
                continue;
            ++d.converged_points;
            lo = std::min(lo, p.gamma_tot);
            hi = std::max(hi, p.gamma_tot);
            sum += p.gamma_tot;
            in_gap += p.detuning_nm > 0.0;
        }
        if (d.converged_points > 0 && in_gap == 0) {
            std::ostringstream os;
            os << std::setprecision(3) << "no in-gap point, beta not evaluated";
            if (hi < 1.3 * lo)
                os << "; decay rate nearly constant at " << sum / d.converged_points << " 1/ns (" << lo << " to " << hi
                   << "), consistent with broadband waveguide coupling";
            d.note = os.str();
        } else {
            try {
                d.result = extract_beta(s, gamma_0);
            } catch (const Error& e) {
                d.error = e.what();
            }
        }
        if (d.result) {
            report.beta_min = std::min(report.beta_min.value_or(d.result->beta), d.result->beta);
            report.beta_max = std::max(report.beta_max.value_or(d.result->beta), d.result->beta);
        }
        report.dots.push_back(std::move(d));
    }
    return report;
}

} // namespace pcw
