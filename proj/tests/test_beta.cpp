#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "pcw/beta_pipeline.hpp"
#include "pcw/emission_model.hpp"
#include "pcw/error.hpp"

using namespace pcw;

namespace {

RateVsDetuning series_of(std::vector<std::pair<double, double>> pts, std::string label = "dot")
{
    RateVsDetuning s;
    s.label = std::move(label);
    for (auto [d, g] : pts)
        s.points.push_back({d, g, 0.05 * g, 0.0, true});
    return s;
}

ErrorKind kind_of(const auto& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::Io;
}

void check_same_values(const BetaResult& a, const BetaResult& b)
{
    CHECK(a.gamma_res == b.gamma_res);
    CHECK(a.gamma_nonres == b.gamma_nonres);
    CHECK(a.beta == b.beta);
    CHECK(a.purcell == b.purcell);
    CHECK(a.lower_bound == b.lower_bound);
}

// Broadened-model series at the given detunings (relative to the curve's edge).
RateVsDetuning model_series(const DispersionCurve& curve, const RateModelConfig& cfg, const std::vector<double>& det,
                            double noise, std::uint64_t seed)
{
    std::vector<double> w;
    for (double d : det)
        w.push_back(curve.band_edge_wavelength_nm() + d);
    auto rc = broadened_rate_curve(curve, cfg, w);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    RateVsDetuning s;
    s.label = "model";
    s.band_edge_source = "bands";
    for (const auto& r : rc.samples) {
        double sigma = 0.05 * r.gamma_tot;
        s.points.push_back({r.detuning_nm, r.gamma_tot + noise * sigma * n(rng), sigma, 0.0, true});
    }
    return s;
}

std::vector<double> detunings()
{
    std::vector<double> d;
    for (int i = 0; i < 16; ++i)
        d.push_back(-2.4 + 0.22 * i);
    return d;
}

} // namespace

TEST_CASE("extract_beta examples")
{
    auto qd3 = series_of({{-1.0, 3.1}, {-0.2, 5.7}, {0.3, 2.2}, {0.8, 0.8}, {1.2, 0.95}});
    auto r = extract_beta(qd3, 1.1);
    CHECK(r.gamma_res == 5.7);
    CHECK(r.gamma_nonres == 0.8);
    CHECK(std::abs(r.beta - 0.860) < 0.015);
    CHECK(r.purcell == doctest::Approx(5.18).epsilon(0.002));
    CHECK(r.lower_bound);
    CHECK(r.n_points_in_gap == 3);

    auto flat = series_of({{-1.0, 2.0}, {0.5, 2.0}, {1.0, 2.0}});
    CHECK(extract_beta(flat, 1.1).beta == 0.0);
}

TEST_CASE("extract_beta errors and unconverged points")
{
    auto no_gap = series_of({{-1.0, 3.0}, {-0.5, 4.0}, {-0.1, 5.0}});
    CHECK(kind_of([&] { extract_beta(no_gap, 1.1); }) == ErrorKind::InsufficientData);
    auto two = series_of({{-1.0, 3.0}, {0.5, 1.0}});
    CHECK(kind_of([&] { extract_beta(two, 1.1); }) == ErrorKind::InsufficientData);
    CHECK(kind_of([&] { extract_beta(series_of({{-1, 3}, {0.5, 1}, {1, 1}}), 0.0); }) == ErrorKind::InvalidArgument);

    auto s = series_of({{-1.0, 3.0}, {-0.2, 5.7}, {0.5, 0.8}, {1.0, 0.9}});
    s.points.push_back({-0.3, 40.0, 9.0, 0.0, false}); // a failed fit must not set the maximum
    s.points.push_back({0.7, 0.01, 0.5, 0.0, false});
    auto r = extract_beta(s, 1.1);
    CHECK(r.gamma_res == 5.7);
    CHECK(r.gamma_nonres == 0.8);
}

TEST_CASE("extract_beta invariants on random series")
{
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> det(-3.0, 3.0), rate(0.1, 10.0), scale(0.01, 100.0);
    for (int t = 0; t < 200; ++t) {
        RateVsDetuning s;
        int n = 5 + static_cast<int>(rng() % 10);
        for (int i = 0; i < n; ++i)
            s.points.push_back({det(rng), rate(rng), 0.1, 0.0, true});
        s.points.push_back({0.5 + std::abs(det(rng)), rate(rng), 0.1, 0.0, true});
        const auto base = extract_beta(s, 1.1);
        CHECK(base.beta >= 0.0);
        CHECK(base.beta <= 1.0);

        // joint scaling
        auto scaled = s;
        double k = scale(rng);
        for (auto& p : scaled.points)
            p.gamma_tot *= k;
        auto rs = extract_beta(scaled, 1.1);
        CHECK(rs.beta == doctest::Approx(base.beta).epsilon(1e-12));
        CHECK(rs.purcell == doctest::Approx(k * base.purcell).epsilon(1e-12));

        // permutation
        auto shuffled = s;
        std::shuffle(shuffled.points.begin(), shuffled.points.end(), rng);
        auto rp = extract_beta(shuffled, 1.1);
        check_same_values(rp, base);
        CHECK(rp.n_points_in_gap == base.n_points_in_gap);

        // removing a point that is neither the maximum nor the in-gap minimum
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            const auto& p = s.points[i];
            bool extremal = p.gamma_tot == base.gamma_res || (p.detuning_nm > 0.0 && p.gamma_tot == base.gamma_nonres);
            if (extremal || s.points.size() <= 3)
                continue;
            auto removed = s;
            removed.points.erase(removed.points.begin() + static_cast<std::ptrdiff_t>(i));
            auto rr = extract_beta(removed, 1.1);
            check_same_values(rr, base);
            CHECK(rr.n_points_in_gap == base.n_points_in_gap - (p.detuning_nm > 0.0 ? 1 : 0));
        }
    }
}

TEST_CASE("rate model fit")
{
    const auto& curve = fixtures::test_curve();
    RateModelConfig truth;
    truth.coupling_scale = 0.4;
    truth.gamma_bg = 0.8;
    truth.gamma_0 = 1.1;
    truth.broadening_fwhm = 2e-4;

    SUBCASE("noiseless series is reproduced exactly")
    {
        auto s = model_series(curve, truth, detunings(), 0.0, 1);
        auto f = fit_rate_model(s, curve, 1.1);
        CHECK(f.converged);
        CHECK(f.reduced_residual < 1e-6);
        CHECK(f.coupling_scale == doctest::Approx(0.4).epsilon(1e-3));
        CHECK(f.gamma_bg == doctest::Approx(0.8).epsilon(1e-3));
        CHECK(f.broadening_fwhm == doctest::Approx(2e-4).epsilon(1e-3));
        CHECK(f.points_used == 16);
    }
    SUBCASE("5% noise: C within 20%, broadening adds no residual")
    {
        for (std::uint64_t seed : {11u, 12u, 13u}) {
            auto s = model_series(curve, truth, detunings(), 1.0, seed);
            auto f = fit_rate_model(s, curve, 1.1);
            CHECK(std::abs(f.coupling_scale / 0.4 - 1.0) < 0.2);
            for (double fixed : {5e-5, 2e-4, 1e-3}) {
                RateModelFitOptions o;
                o.fixed_broadening = fixed;
                auto g = fit_rate_model(s, curve, 1.1, o);
                CHECK(g.broadening_fwhm == fixed);
                CHECK(f.chi_square <= g.chi_square * (1.0 + 1e-9));
            }
        }
    }
    SUBCASE("detunings on one side of the edge")
    {
        std::vector<double> gap = {0.2, 0.5, 0.9, 1.3, 1.8, 2.5};
        auto s = model_series(curve, truth, gap, 0.0, 1);
        CHECK(kind_of([&] { fit_rate_model(s, curve, 1.1); }) == ErrorKind::InsufficientData);
    }
    SUBCASE("too few converged points")
    {
        auto s = model_series(curve, truth, {-1.0, -0.3, 0.4, 1.0}, 0.0, 1);
        CHECK(kind_of([&] { fit_rate_model(s, curve, 1.1); }) == ErrorKind::InsufficientData);
    }
    SUBCASE("extract_beta on a model series matches the injected value")
    {
        // The in-gap minimum only approaches the background a few nm into the gap.
        auto det = detunings();
        for (double d : {2.0, 3.0, 4.0, 5.0})
            det.push_back(d);
        auto s = model_series(curve, truth, det, 0.0, 1);
        double max = 0.0;
        for (const auto& p : s.points)
            max = std::max(max, p.gamma_tot);
        auto r = extract_beta(s, 1.1);
        CHECK(std::abs(r.beta - (max - 0.8) / max) < 0.02);
    }
}

TEST_CASE("multi-dot report")
{
    std::vector<RateVsDetuning> dots = {
        series_of({{-0.9, 2.9}, {-0.3, 5.7}, {0.4, 1.3}, {0.9, 0.85}}, "QD1"),
        series_of({{-0.8, 2.0}, {-0.2, 3.0}, {0.5, 1.1}, {1.0, 1.2}}, "QD2"),
        series_of({{-0.7, 2.5}, {-0.1, 4.0}, {0.4, 1.0}}, "QD3"),
        series_of({{-1.0, 3.0}, {-0.2, 4.8}, {0.6, 1.0}, {1.1, 1.4}}, "QD4"),
        series_of({{-38.5, 2.01}, {-38.2, 2.07}, {-37.9, 1.98}, {-37.6, 2.04}}, "QD5"),
    };
    auto report = multi_dot_report(dots, 1.1);
    REQUIRE(report.dots.size() == 5);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(report.dots[i].label == dots[i].label);
        CHECK(report.dots[i].result.has_value());
        CHECK(report.dots[i].note.empty());
    }
    REQUIRE(report.beta_min.has_value());
    REQUIRE(report.beta_max.has_value());
    CHECK(*report.beta_min == doctest::Approx(1.0 - 1.1 / 3.0));
    CHECK(*report.beta_max == doctest::Approx(1.0 - 0.85 / 5.7));
    CHECK(*report.beta_min < 0.64);
    CHECK(*report.beta_max > 0.84);

    const auto& far = report.dots[4];
    CHECK_FALSE(far.result.has_value());
    CHECK(far.note.find("broadband") != std::string::npos);
    CHECK(far.error.empty());
    CHECK(far.converged_points == 4);

    CHECK(multi_dot_report({}, 1.1).dots.empty());
    CHECK_FALSE(multi_dot_report({}, 1.1).beta_min.has_value());

    // a dot with too few points carries its error instead of a result
    std::vector<RateVsDetuning> bad = {series_of({{-0.5, 3.0}, {0.5, 1.0}}, "short")};
    auto rb = multi_dot_report(bad, 1.1);
    CHECK_FALSE(rb.dots[0].result.has_value());
    CHECK_FALSE(rb.dots[0].error.empty());
}
