#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "pcw/error.hpp"
#include "pcw/geometry.hpp"
#include "pcw/io.hpp"
#include "tmpdir.hpp"

using namespace pcw;
namespace fs = std::filesystem;

namespace {

Error error_of(const auto& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e;
    }
    FAIL("no error thrown");
    return Error(ErrorKind::Io, "");
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

} // namespace

TEST_CASE("number formatting round-trips")
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
        auto s = io::format_number(v);
        CHECK(std::stod(s) == v);
        CHECK(io::format_number(v) == s);
    }
    CHECK(io::format_number(0.5) == "0.5");
    CHECK(io::format_number(968.4) == "968.4");
}

TEST_CASE("CSV parsing")
{
    auto t = io::parse_csv("# comment\na,b,c\n\n1,2.5,\n-3,true,false\n", "x.csv");
    CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.lines == std::vector<int>{4, 5});
    CHECK(t.rows[0][1] == 2.5);
    CHECK(std::isnan(t.rows[0][2]));
    CHECK(t.rows[1][1] == 1.0);
    CHECK(t.rows[1][2] == 0.0);
    CHECK(t.values("a") == std::vector<double>{1.0, -3.0});

    auto bad = error_of([] { io::parse_csv("a,b\n1,2\n3,x\n", "bad.csv"); });
    CHECK(bad.kind() == ErrorKind::Parse);
    CHECK(contains(bad.what(), "bad.csv:3"));
    auto missing = error_of([&] { t.column("zzz"); });
    CHECK(missing.kind() == ErrorKind::Parse);
    CHECK(contains(missing.what(), "x.csv"));
    CHECK(error_of([] { io::parse_csv("a,b\n1,2,3\n", "w.csv"); }).kind() == ErrorKind::Parse);
}

TEST_CASE("atomic writes and missing files")
{
    TempDir dir("io");
    auto p = dir / "out.txt";
    io::write_atomic(p, "first\n");
    io::write_atomic(p, "second\n");
    CHECK(io::read_text(p) == "second\n");
    CHECK_FALSE(fs::exists(dir / "out.txt.tmp"));

    auto e = error_of([&] { io::read_text(dir / "nope.csv"); });
    CHECK(e.kind() == ErrorKind::Io);
    CHECK(contains(e.what(), "nope.csv"));
}

TEST_CASE("histogram files")
{
    TempDir dir("hist");
    auto h = fixtures::decay_histogram(fixtures::bi_truth(2.0), 31);
    h.irf.fwhm_ps = 250.0;
    auto csv = dir / "h.csv";
    io::write_atomic(csv, io::histogram_csv(h));

    SUBCASE("without a sidecar the bin width comes from the time column")
    {
        auto back = io::load_histogram(csv);
        CHECK(back.counts == h.counts);
        CHECK(back.config.bin_width_ps == doctest::Approx(25.0));
        CHECK(back.irf.fwhm_ps == 280.0);
        CHECK(back.seed == 0);
    }
    SUBCASE("with the sidecar all metadata survives")
    {
        io::write_atomic(io::sidecar_path(csv), io::dump(io::histogram_sidecar(h)));
        auto back = io::load_histogram(csv);
        CHECK(back.counts == h.counts);
        CHECK(back.seed == 31);
        CHECK(back.irf.fwhm_ps == 250.0);
        CHECK(back.irf.t0_ns == h.irf.t0_ns);
        CHECK(back.config.repetition_period_ns == h.config.repetition_period_ns);
        CHECK(back.config.background_rate == h.config.background_rate);
        REQUIRE(back.bin_edges.size() == h.bin_edges.size());
        for (std::size_t i = 0; i < h.bin_edges.size(); ++i)
            CHECK(back.bin_edges[i] == doctest::Approx(h.bin_edges[i]).epsilon(1e-12));
    }
    SUBCASE("bad rows name the line")
    {
        io::write_atomic(dir / "bad.csv", "time_ns,counts\n0,1\n0.025,2.5\n");
        auto e = error_of([&] { io::load_histogram(dir / "bad.csv"); });
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(contains(e.what(), "bad.csv:3"));
    }
}

TEST_CASE("spectrum, tuning and rate files")
{
    TempDir dir("data");
    SUBCASE("spectrum")
    {
        auto s = fixtures::edge_spectrum(3);
        auto p = dir / "s.csv";
        io::write_atomic(p, io::spectrum_csv(s));
        auto back = io::load_spectrum(p);
        CHECK(back.wavelength_nm == s.wavelength_nm);
        CHECK(back.intensity == s.intensity);
        auto e = error_of([] { io::parse_spectrum("wavelength_nm,intensity\n960,1\n959,2\n", "desc.csv"); });
        CHECK(contains(e.what(), "desc.csv"));
    }
    SUBCASE("tuning")
    {
        io::TuningData d{"qd", {10, 20, 30}, {967.1, 967.6, 968.2}};
        auto p = dir / "qd.csv";
        io::write_atomic(p, io::tuning_csv(d));
        auto back = io::load_tuning_data(p);
        CHECK(back.temperatures_k == d.temperatures_k);
        CHECK(back.wavelengths_nm == d.wavelengths_nm);
        CHECK(back.label == "qd");
    }
    SUBCASE("rates as CSV and JSON")
    {
        RateVsDetuning s;
        s.label = "QD3";
        s.points = {{-0.5, 3.2, 0.1, 10.0, true}, {0.25, 1.1, 0.05, 40.0, false}};
        auto p = dir / "QD3.csv";
        io::write_atomic(p, io::rates_csv(s));
        auto back = io::load_rate_series(p);
        REQUIRE(back.size() == 1);
        CHECK(back[0].label == "QD3");
        REQUIRE(back[0].points.size() == 2);
        CHECK(back[0].points[1].detuning_nm == 0.25);
        CHECK(back[0].points[1].sigma == 0.05);
        CHECK_FALSE(back[0].points[1].converged);

        nlohmann::json arr = nlohmann::json::array({io::to_json(s), io::to_json(s)});
        arr[1]["label"] = "QD4";
        auto pj = dir / "all.json";
        io::write_atomic(pj, io::dump(arr));
        auto both = io::load_rate_series(pj);
        REQUIRE(both.size() == 2);
        CHECK(both[1].label == "QD4");
        CHECK(both[0].points[0].gamma_tot == 3.2);

        io::write_atomic(dir / "bad.json", "{\"label\": \"x\"}");
        CHECK(error_of([&] { io::load_rate_series(dir / "bad.json"); }).kind() == ErrorKind::Parse);
    }
}

TEST_CASE("batch manifest resolves relative paths")
{
    TempDir dir("manifest");
    fs::create_directories(dir / "data");
    auto h = fixtures::decay_histogram(fixtures::bi_truth(2.0), 5, 2e4);
    io::write_atomic(dir / "data" / "a.csv", io::histogram_csv(h));
    io::write_atomic(dir / "m.json",
                     R"({"histograms": [{"path": "data/a.csv", "tag": "T10", "wavelength_nm": 967.9, "temperature_K": 10}]})");
    auto list = io::load_histogram_manifest(dir / "m.json");
    REQUIRE(list.size() == 1);
    CHECK(list[0].tag == "T10");
    CHECK(list[0].wavelength_nm == 967.9);
    CHECK(list[0].histogram.counts == h.counts);

    io::write_atomic(dir / "m2.json", R"({"histograms": [{"path": "data/missing.csv"}]})");
    auto e = error_of([&] { io::load_histogram_manifest(dir / "m2.json"); });
    CHECK(e.kind() == ErrorKind::Io);
    CHECK(contains(e.what(), "missing.csv"));
}

TEST_CASE("geometry input")
{
    auto g = parse_geometry("# W1\nlattice_constant = 250\nhole_radius_ratio: 0.29\nremove_center_row = true\n");
    CHECK(g.lattice_constant == 250.0);
    CHECK(g.hole_radius_ratio == 0.29);
    auto j = parse_geometry(R"({"effective_index": 2.9, "supercell_rows": 9})");
    CHECK(j.effective_index == 2.9);
    CHECK(j.supercell_rows == 9);
    auto round = parse_geometry(to_json(g).dump());
    CHECK(round.lattice_constant == g.lattice_constant);

    auto e = error_of([] { parse_geometry("lattice_constant = 250\nfoo = 1\n", "geo.txt"); });
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(contains(e.what(), "geo.txt:2"));
    CHECK(contains(error_of([] { parse_geometry("hole_radius_ratio = abc\n", "g"); }).what(), "g:1"));
}

TEST_CASE("dispersion table")
{
    auto curve = fixtures::empty_lattice_curve(3.44, 256.0, 11);
    auto text = io::dispersion_csv(curve);
    auto t = io::parse_csv(text, "d.csv");
    CHECK(t.header == std::vector<std::string>{"k_2pi_over_a", "freq_a_over_lambda", "wavelength_nm", "group_index"});
    REQUIRE(t.rows.size() == 11);
    CHECK(t.rows[5][1] == doctest::Approx(0.25 / 3.44));
    CHECK(t.rows[5][2] == doctest::Approx(256.0 * 3.44 / 0.25));
    CHECK(t.rows[5][3] == doctest::Approx(3.44));
}
