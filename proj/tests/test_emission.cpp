#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "pcw/emission_model.hpp"
#include "pcw/error.hpp"

using namespace pcw;

namespace {

RateModelConfig config(double broadening = 0.0)
{
    RateModelConfig c;
    c.coupling_scale = 0.4;
    c.gamma_bg = 0.8;
    c.gamma_0 = 1.1;
    c.broadening_fwhm = broadening;
    return c;
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

double max_rate(const DispersionCurve& curve, const RateModelConfig& c, double lo, double hi, int n)
{
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i)
        w[i] = lo + (hi - lo) * i / (n - 1);
    auto r = broadened_rate_curve(curve, c, w);
    double m = 0.0;
    for (const auto& s : r.samples)
        m = std::max(m, s.gamma_tot);
    return m;
}

} // namespace

TEST_CASE("lossless rate: gap, divergence and the empty lattice")
{
    const auto& curve = fixtures::test_curve();
    const double edge = curve.band_edge_wavelength_nm();
    REQUIRE(curve.propagating_above_edge()); // propagating side is at shorter wavelength

    SUBCASE("inside the gap the rate is the background exactly")
    {
        for (double d : {1e-6, 0.3, 1.0, 7.0, 40.0}) {
            auto r = lossless_rate(curve, config(), edge + d);
            CHECK(r.gamma_wg == 0.0);
            CHECK(r.gamma_tot == 0.8);
        }
    }
    SUBCASE("rate grows without bound towards the edge")
    {
        double prev = 0.0;
        for (double d : {3.0, 1.0, 0.1, 1e-2, 1e-3, 1e-4, 1e-5}) {
            double g = lossless_rate(curve, config(), edge - d).gamma_tot;
            CHECK(g > prev);
            prev = g;
        }
        CHECK(prev > 100.0);
    }
    SUBCASE("detuning is wavelength minus edge")
    {
        std::vector<double> w = {edge - 2.0, edge - 0.5, edge + 0.5};
        auto rc = lossless_rate_curve(curve, config(), w);
        REQUIRE(rc.samples.size() == 3);
        for (const auto& s : rc.samples) {
            CHECK(s.detuning_nm == s.wavelength_nm - edge);
            CHECK(s.gamma_tot >= 0.8);
        }
    }
    SUBCASE("outside the modeled window")
    {
        double far = curve.wavelength_at_frequency(curve.far_frequency());
        CHECK(kind_of([&] { lossless_rate(curve, config(), far - 5.0); }) == ErrorKind::OutOfDomain);
    }
    SUBCASE("rate increases with the coupling scale")
    {
        auto lo = config(), hi = config();
        hi.coupling_scale = 0.6;
        CHECK(lossless_rate(curve, hi, edge - 1.0).gamma_tot > lossless_rate(curve, lo, edge - 1.0).gamma_tot);
    }
    SUBCASE("empty lattice with C = 1 gives gamma_0 + gamma_bg")
    {
        auto flat = fixtures::empty_lattice_curve();
        auto c = config();
        c.coupling_scale = 1.0;
        double e = flat.band_edge_wavelength_nm();
        for (double f : {1.01, 1.2, 1.5, 1.9}) {
            CHECK(lossless_rate(flat, c, e * f).gamma_tot == doctest::Approx(1.1 + 0.8).epsilon(1e-12));
        }
    }
}

TEST_CASE("broadened rate curve")
{
    const auto& curve = fixtures::test_curve();
    const double edge = curve.band_edge_wavelength_nm();

    SUBCASE("zero-width limit matches the lossless value away from the edge")
    {
        for (double d : {-2.0, -0.7}) {
            std::vector<double> w = {edge + d};
            double lossless = lossless_rate(curve, config(), edge + d).gamma_tot;
            double broad = broadened_rate_curve(curve, config(1e-7), w).samples[0].gamma_tot;
            CHECK(broad == doctest::Approx(lossless).epsilon(0.01));
        }
    }
    SUBCASE("maximum is finite and stable under grid refinement")
    {
        for (double fwhm : {5e-5, 2e-4, 1e-3}) {
            auto c = config(fwhm);
            double coarse = max_rate(curve, c, edge - 4.0, edge + 4.0, 10000);
            double fine = max_rate(curve, c, edge - 4.0, edge + 4.0, 40000);
            CHECK(std::isfinite(coarse));
            CHECK(std::abs(coarse - fine) < 0.02 * fine);
        }
    }
    SUBCASE("never below the background, peak near the edge on the propagating side")
    {
        auto rc = broadened_rate_curve(curve, config(2e-4));
        REQUIRE(rc.samples.size() >= 4096);
        auto peak = std::max_element(rc.samples.begin(), rc.samples.end(),
                                     [](const auto& a, const auto& b) { return a.gamma_tot < b.gamma_tot; });
        for (const auto& s : rc.samples)
            CHECK(s.gamma_tot >= 0.8);
        CHECK(peak->detuning_nm < 0.0);
        CHECK(peak->detuning_nm > -2.0);
        // smooth tail into the gap
        CHECK(rc.samples.back().gamma_tot < peak->gamma_tot);
        CHECK(rc.samples.back().gamma_tot > 0.8);
    }
    SUBCASE("convolution preserves the density area over the window")
    {
        const double fwhm = 2e-4;
        BroadenedDensity density(curve);
        const double nu_e = curve.band_edge_frequency();
        const double lo = nu_e - 20 * fwhm, hi = nu_e + 20 * fwhm;
        const int n = 200000;
        double broadened = 0.0;
        for (int i = 0; i < n; ++i) {
            double nu = lo + (hi - lo) * (i + 0.5) / n;
            broadened += density(nu, fwhm) * (hi - lo) / n;
        }
        double lossless = curve.group_index_integral(nu_e, hi);
        CHECK(broadened == doctest::Approx(lossless).epsilon(0.01));
        CHECK(density.total_mass() == doctest::Approx(curve.group_index_integral(nu_e, curve.far_frequency())).epsilon(1e-9));
    }
    SUBCASE("invalid configurations")
    {
        std::vector<double> w = {edge};
        CHECK(kind_of([&] { broadened_rate_curve(curve, config(0.0), w); }) == ErrorKind::InvalidArgument);
        CHECK(kind_of([&] { broadened_rate_curve(curve, config(-1e-4), w); }) == ErrorKind::InvalidArgument);
        auto c = config(1e-4);
        c.coupling_scale = 1.5;
        CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidArgument);
        c.coupling_scale = 0.0;
        CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidArgument);
    }
}

TEST_CASE("beta and Purcell factors")
{
    CHECK(beta_factor(5.7, 0.8) == doctest::Approx(0.8596).epsilon(1e-4));
    CHECK(std::abs(beta_factor(5.7, 0.8) - 0.860) < 0.015);
    CHECK(beta_factor(5.7, 0.43) == doctest::Approx(0.9246).epsilon(1e-4));
    CHECK(beta_factor(5.7, 0.05) == doctest::Approx(0.9912).epsilon(1e-4));
    CHECK(beta_factor(2.5, 2.5) == 0.0);
    CHECK(beta_factor(3.0, 0.0) == 1.0);
    CHECK(purcell_factor(5.7, 1.1) == doctest::Approx(5.1818).epsilon(1e-4));
    CHECK(purcell_factor(1.7, 1.7) == 1.0);
    CHECK(purcell_factor(0.0, 1.1) == 0.0);

    CHECK(kind_of([] { beta_factor(0.5, 0.8); }) == ErrorKind::Ordering);
    CHECK(kind_of([] { beta_factor(0.0, 0.0); }) == ErrorKind::DivisionByZero);
    CHECK(kind_of([] { purcell_factor(5.7, 0.0); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { purcell_factor(5.7, -1.0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("beta and Purcell are invariant under joint scaling")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> rate(0.01, 20.0), scale(1e-3, 1e3);
    for (int i = 0; i < 500; ++i) {
        double a = rate(rng), b = rate(rng), s = scale(rng);
        double hi = std::max(a, b), lo = std::min(a, b);
        double beta = beta_factor(hi, lo);
        CHECK(beta >= 0.0);
        CHECK(beta <= 1.0);
        CHECK(beta_factor(s * hi, s * lo) == doctest::Approx(beta).epsilon(1e-12));
        CHECK(purcell_factor(s * a, s * b) == doctest::Approx(purcell_factor(a, b)).epsilon(1e-12));
    }
}
