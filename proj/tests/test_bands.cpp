#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "fixtures.hpp"
#include "pcw/error.hpp"
#include "pcw/photonic_bands.hpp"

using namespace pcw;

namespace {

constexpr double kPi = std::numbers::pi;

// ∫_disk exp(-2πi G·ρ) dA by Simpson in ρ and the trapezoid rule in φ.
std::complex<double> disk_integral(const Eigen::Vector2d& G, double radius)
{
    const int nr = 2000, nphi = 256;
    std::complex<double> total{0.0, 0.0};
    for (int i = 0; i <= nr; ++i) {
        double rho = radius * i / nr;
        double w = (i == 0 || i == nr) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        std::complex<double> ring{0.0, 0.0};
        for (int j = 0; j < nphi; ++j) {
            double phi = 2.0 * kPi * j / nphi;
            double arg = -2.0 * kPi * (G.x() * rho * std::cos(phi) + G.y() * rho * std::sin(phi));
            ring += std::complex<double>(std::cos(arg), std::sin(arg));
        }
        total += w * rho * ring * (2.0 * kPi / nphi);
    }
    return total * (radius / nr / 3.0);
}

std::vector<double> free_frequencies(const PlaneWaveBasis& basis, double k, double n_eff, std::size_t count)
{
    std::vector<double> nu;
    for (const auto& G : basis.vectors)
        nu.push_back((Eigen::Vector2d(k, 0.0) + G).norm() / n_eff);
    std::sort(nu.begin(), nu.end());
    nu.resize(count);
    return nu;
}

} // namespace

TEST_CASE("plane-wave basis grows with the square of the cutoff")
{
    WaveguideGeometry g;
    auto b4 = PlaneWaveBasis::build(g, 4);
    auto b8 = PlaneWaveBasis::build(g, 8);
    double ratio = double(b8.wave_count()) / double(b4.wave_count());
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
    CHECK_THROWS_AS(PlaneWaveBasis::build(g, 2), Error);
}

TEST_CASE("uniform medium has only the G = 0 coefficient")
{
    auto g = WaveguideGeometry{};
    g.hole_radius_ratio = 0.0;
    auto basis = PlaneWaveBasis::build(g, 3);
    auto table = dielectric_fourier(g, basis);
    for (int m = -table.max_m(); m <= table.max_m(); ++m)
        for (int n = -table.max_n(); n <= table.max_n(); ++n) {
            if (m == 0 && n == 0)
                CHECK(table(0, 0).real() == doctest::Approx(3.44 * 3.44).epsilon(1e-15));
            else
                CHECK(std::abs(table(m, n)) == 0.0);
        }
}

TEST_CASE("G = 0 coefficient is the area-averaged permittivity")
{
    WaveguideGeometry g;
    auto lattice = SupercellLattice::for_geometry(g);
    auto basis = PlaneWaveBasis::build(g, 3);
    auto table = dielectric_fourier(g, basis);
    const double n2 = g.effective_index * g.effective_index;
    const double r = g.hole_radius_ratio;
    const double holes = double(lattice.hole_centers(g).size());
    CHECK(holes == g.supercell_rows - 1);
    double expected = n2 - (n2 - 1.0) * holes * kPi * r * r / lattice.area;
    CHECK(table(0, 0).real() == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::abs(table(0, 0).imag()) < 1e-14);
}

TEST_CASE("dielectric coefficients agree with direct quadrature over the holes")
{
    WaveguideGeometry g;
    auto lattice = SupercellLattice::for_geometry(g);
    auto basis = PlaneWaveBasis::build(g, 3);
    auto table = dielectric_fourier(g, basis);
    const auto centers = lattice.hole_centers(g);
    const double n2 = g.effective_index * g.effective_index;

    const int picks[][2] = {{1, 0}, {0, 1}, {1, 3}, {-2, 5}, {2, -7}, {3, 4}, {0, 11}};
    for (const auto& p : picks) {
        CAPTURE(p[0]);
        CAPTURE(p[1]);
        Eigen::Vector2d G = p[0] * lattice.b1 + p[1] * lattice.b2;
        std::complex<double> sum{0.0, 0.0};
        const auto disk = disk_integral(G, g.hole_radius_ratio);
        for (const auto& c : centers) {
            double ph = -2.0 * kPi * G.dot(c);
            sum += std::complex<double>(std::cos(ph), std::sin(ph)) * disk;
        }
        std::complex<double> oracle = (1.0 - n2) * sum / lattice.area;
        auto value = table(p[0], p[1]);
        REQUIRE(std::abs(oracle) > 1e-4);
        CHECK(std::abs(value - oracle) / std::abs(oracle) < 1e-6);
    }
}

TEST_CASE("eigenproblem matrix is Hermitian")
{
    auto g = fixtures::calibrated_geometry();
    BandSolver solver(g, PlaneWaveBasis::build(g, 3));
    for (double k : {0.0, 0.21, 0.5}) {
        Eigen::MatrixXcd m = solver.operator_matrix(k);
        double scale = m.cwiseAbs().maxCoeff();
        double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
        CHECK(asym <= 1e-12 * scale);
    }
}

TEST_CASE("empty lattice reproduces free propagation exactly")
{
    auto g = WaveguideGeometry{};
    g.hole_radius_ratio = 0.0;
    auto basis = PlaneWaveBasis::build(g, 4);
    for (double k : {0.5, 0.17, 0.33}) {
        auto nu = solve_bands(g, basis, k, 19);
        auto expected = free_frequencies(basis, k, g.effective_index, nu.size());
        REQUIRE(nu.size() == 19);
        for (std::size_t i = 0; i < nu.size(); ++i)
            CHECK(std::abs(nu[i] - expected[i]) <= 1e-9 * expected[i]);
    }
    // k = 0.5 in units of 2π/a: lowest ν = |k| / n_eff.
    auto nu = solve_bands(g, basis, 0.5, 1);
    CHECK(nu[0] == doctest::Approx(0.5 / 3.44).epsilon(1e-12));
}

TEST_CASE("band structure is deterministic")
{
    auto g = fixtures::calibrated_geometry();
    BandSolver solver(g, PlaneWaveBasis::build(g, 3));
    auto ks = uniform_k_samples(0.3, 0.5, 3);
    auto a = compute_band_structure(solver, ks);
    auto b = compute_band_structure(solver, ks);
    CHECK(a.frequencies == b.frequencies);
    REQUIRE(a.modes.size() == b.modes.size());
    for (std::size_t i = 0; i < a.modes.size(); ++i)
        CHECK(a.modes[i] == b.modes[i]);
}

TEST_CASE("calibrated geometry puts the band edge at 968.4 nm")
{
    auto g = fixtures::calibrated_geometry();
    auto edge = find_band_edge(g, PlaneWaveBasis::build(g, kDefaultCutoff));
    CHECK(edge.wavelength_nm == doctest::Approx(fixtures::kCalibratedEdgeNm).epsilon(1e-6));
    CHECK(std::abs(edge.wavelength_nm - 968.4) < 0.1);
    CHECK(fixtures::kCalibratedIndex < 3.44);
    CHECK(edge.core_weight > 0.5);
    CHECK(edge.frequency > edge.gap.lower);
    CHECK(edge.frequency < edge.gap.upper);
}

TEST_CASE("band edge red-shifts as the effective index increases")
{
    auto g = fixtures::calibrated_geometry();
    auto basis = PlaneWaveBasis::build(g, 4);
    double lo = find_band_edge(g.with_index(g.effective_index - 0.01), basis).frequency;
    double mid = find_band_edge(g, basis).frequency;
    double hi = find_band_edge(g.with_index(g.effective_index + 0.01), basis).frequency;
    CHECK(lo > mid);
    CHECK(mid > hi);
}

TEST_CASE("bulk crystal has no guided mode")
{
    auto g = fixtures::calibrated_geometry().bulk();
    auto basis = PlaneWaveBasis::build(g, 4);
    try {
        find_band_edge(g, basis);
        FAIL("expected no-guided-mode");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoGuidedMode);
    }
    BandSolver solver(g, basis);
    auto bands = compute_band_structure(solver, uniform_k_samples(0.0, 0.5, 32));
    CHECK_THROWS_AS(extract_guided_band(bands), Error);
}

TEST_CASE("group index of a linear dispersion is the effective index")
{
    auto curve = fixtures::empty_lattice_curve(3.44);
    CHECK_FALSE(curve.propagating_above_edge());
    for (double f : {0.02, 0.06, 0.1, 0.14}) {
        double nu = f;
        CHECK(curve.group_index(nu) == doctest::Approx(3.44).epsilon(1e-9));
    }
    CHECK_THROWS_AS(curve.group_index(0.2), Error);
}

TEST_CASE("guided band: local-fit oracle and slow-down near the edge")
{
    const auto& curve = fixtures::test_curve();
    const auto& pts = curve.points();
    const std::size_t begin = curve.segment_begin();
    REQUIRE(pts.size() - begin >= 8);

    SUBCASE("mid-band group index matches a local quadratic fit")
    {
        std::size_t i = (begin + pts.size() - 1) / 2;
        // Quadratic through five neighbours by least squares, derivative at k_i.
        Eigen::MatrixXd A(5, 3);
        Eigen::VectorXd y(5);
        for (int j = -2; j <= 2; ++j) {
            double dk = pts[i + j].k - pts[i].k;
            A.row(j + 2) << 1.0, dk, dk * dk;
            y(j + 2) = pts[i + j].frequency;
        }
        Eigen::Vector3d c = A.colPivHouseholderQr().solve(y);
        double oracle = std::abs(1.0 / c(1));
        CHECK(curve.group_index(pts[i].frequency) == doctest::Approx(oracle).epsilon(0.02));
    }

    SUBCASE("group index is non-decreasing over the last 5% towards the edge")
    {
        const double edge = curve.band_edge_frequency();
        const double span = std::abs(curve.far_frequency() - edge);
        const double dir = curve.propagating_above_edge() ? 1.0 : -1.0;
        double prev = 0.0;
        for (int j = 50; j >= 1; --j) {
            double nu = edge + dir * 0.05 * span * j / 50.0;
            double ng = curve.group_index(nu);
            CHECK(ng >= prev);
            prev = ng;
        }
    }
}

TEST_CASE("group index exceeds 100 next to the edge on a fine k grid")
{
    auto g = fixtures::calibrated_geometry();
    BandSolver solver(g, PlaneWaveBasis::build(g, 4));
    auto ks = uniform_k_samples(0.43, 0.5, 36); // spacing 0.002
    auto bands = compute_band_structure(solver, ks);
    auto curve = extract_guided_band(bands);
    const auto& ng = curve.point_group_index();
    REQUIRE(ng.size() >= 2);
    auto nearest = ng[ng.size() - 2];
    REQUIRE(nearest.has_value());
    CHECK(*nearest > 100.0);
}

TEST_CASE("calibration: fixed point and unreachable targets")
{
    // A shorter lattice constant moves the n_eff = 3.44 edge into the allowed window.
    auto g = WaveguideGeometry{};
    g.lattice_constant = 206.0;
    auto basis = PlaneWaveBasis::build(g, 4);
    double at_max = find_band_edge(g, basis).wavelength_nm;
    REQUIRE(at_max > 900.0);
    REQUIRE(at_max < 1050.0);
    auto r = calibrate_effective_index(g, 4, at_max);
    CHECK(r.effective_index == 3.44);
    CHECK(std::abs(r.residual_nm) < 1e-9);

    try {
        calibrate_effective_index(g, 4, 10.0);
        FAIL("expected calibration failure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CalibrationFailure);
    }
    try {
        calibrate_effective_index(g, 4, 1040.0);
        FAIL("expected calibration failure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CalibrationFailure);
    }
}

TEST_CASE("geometry validation")
{
    WaveguideGeometry g;
    g.supercell_rows = 8;
    CHECK_THROWS_AS(g.validate(), Error);
    g = WaveguideGeometry{};
    g.hole_radius_ratio = 0.5;
    CHECK_THROWS_AS(g.validate(), Error);
}
