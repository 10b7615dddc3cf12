#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "pcw/cli.hpp"
#include "pcw/io.hpp"
#include "tmpdir.hpp"

using namespace pcw;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    cli::RunOutcome outcome;
    std::string out, err;
};

Run run(cli::RunConfig rc)
{
    std::ostringstream o, e;
    Run r;
    r.outcome = cli::run(rc, o, e);
    r.out = o.str();
    r.err = e.str();
    return r;
}

cli::RunConfig config(cli::Command c, const fs::path& out, std::string stamp)
{
    cli::RunConfig rc;
    rc.command = c;
    rc.out_dir = out;
    rc.timestamp = std::move(stamp);
    return rc;
}

json read_json(const fs::path& p) { return json::parse(io::read_text(p)); }

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

} // namespace

TEST_CASE("command names")
{
    for (const auto& n : cli::command_names()) {
        auto c = cli::parse_command(n);
        REQUIRE(c.has_value());
        CHECK(std::string(cli::to_string(*c)) == n);
    }
    CHECK_FALSE(cli::parse_command("frobnicate").has_value());
}

TEST_CASE("simulate and fit decays reproducibly")
{
    TempDir dir("cli");
    auto sim = config(cli::Command::simulate_decay, dir.path(), "a");
    sim.seed = 42;
    sim.plot = true;
    auto a = run(sim);
    REQUIRE(a.outcome.exit_code == cli::kExitOk);
    CHECK(a.outcome.run_dir == dir / "simulate-decay-a");
    sim.timestamp = "b";
    auto b = run(sim);
    REQUIRE(b.outcome.exit_code == cli::kExitOk);
    for (const char* f : {"histogram.csv", "histogram.json", "decay.svg"})
        CHECK(io::read_text(a.outcome.run_dir / f) == io::read_text(b.outcome.run_dir / f));

    auto manifest = read_json(a.outcome.run_dir / "manifest.json");
    CHECK(manifest["command"] == "simulate-decay");
    CHECK(manifest["seed"] == 42);
    CHECK(manifest["status"] == "ok");
    CHECK(manifest["build"]["version"] == PCW_VERSION);
    CHECK(manifest["options"].contains("gamma_fast"));
    CHECK(manifest["outputs"].size() == 3);

    // A second run with the same stamp does not overwrite the first.
    sim.timestamp = "a";
    CHECK(run(sim).outcome.run_dir == dir / "simulate-decay-a-2");

    const fs::path hist = a.outcome.run_dir / "histogram.csv";
    auto fit = config(cli::Command::fit_decay, dir.path(), "f1");
    fit.inputs = {hist};
    auto f1 = run(fit);
    REQUIRE(f1.outcome.exit_code == cli::kExitOk);
    fit.timestamp = "f2";
    auto f2 = run(fit);
    CHECK(io::read_text(f1.outcome.run_dir / "fits.json") == io::read_text(f2.outcome.run_dir / "fits.json"));
    CHECK(io::read_text(f1.outcome.run_dir / "rates.csv") == io::read_text(f2.outcome.run_dir / "rates.csv"));

    auto fits = read_json(f1.outcome.run_dir / "fits.json");
    REQUIRE(fits.size() == 1);
    CHECK(fits[0]["tag"] == "histogram");
    double g = fits[0]["fit"]["params"]["gamma_fast"].get<double>();
    CHECK(g == doctest::Approx(2.0).epsilon(0.05));
    auto in = read_json(f1.outcome.run_dir / "manifest.json")["inputs"];
    REQUIRE(in.size() == 1);
    CHECK(in[0]["bytes"] == fs::file_size(hist));
    CHECK(contains(f1.out, "histogram"));
}

TEST_CASE("batch fitting through a manifest")
{
    TempDir dir("batch");
    for (int i = 0; i < 2; ++i) {
        auto h = fixtures::decay_histogram(fixtures::bi_truth(1.5 + i), 60 + i, 3e4);
        io::write_atomic(dir / ("h" + std::to_string(i) + ".csv"), io::histogram_csv(h));
    }
    io::write_atomic(dir / "batch.json", R"({"histograms": [
        {"path": "h0.csv", "tag": "T10", "wavelength_nm": 968.1, "temperature_K": 10},
        {"path": "h1.csv", "tag": "T15", "wavelength_nm": 968.3, "temperature_K": 15}]})");
    auto rc = config(cli::Command::fit_decay, dir / "out", "x");
    rc.manifest = dir / "batch.json";
    auto r = run(rc);
    REQUIRE(r.outcome.exit_code == cli::kExitOk);
    std::istringstream rates(io::read_text(r.outcome.run_dir / "rates.csv"));
    std::string header, row1, row2, extra;
    std::getline(rates, header);
    std::getline(rates, row1);
    std::getline(rates, row2);
    CHECK_FALSE(std::getline(rates, extra));
    CHECK(row1.rfind("T10,968.1,10,", 0) == 0);
    CHECK(row2.rfind("T15,968.3,15,", 0) == 0);
    auto fits = read_json(r.outcome.run_dir / "fits.json");
    CHECK(fits[1]["tag"] == "T15");
}

TEST_CASE("usage and input errors")
{
    TempDir dir("errors");
    SUBCASE("missing input file names the path")
    {
        auto rc = config(cli::Command::fit_decay, dir.path(), "m");
        rc.inputs = {dir / "absent.csv"};
        auto r = run(rc);
        CHECK(r.outcome.exit_code == cli::kExitUsage);
        CHECK(contains(r.err, "absent.csv"));
        auto e = json::parse(r.err);
        CHECK(e["error"]["kind"] == "io");
    }
    SUBCASE("simulate-decay needs a seed")
    {
        auto r = run(config(cli::Command::simulate_decay, dir.path(), "s"));
        CHECK(r.outcome.exit_code == cli::kExitUsage);
        CHECK(contains(r.err, "seed"));
    }
    SUBCASE("unknown option keys are rejected and recorded")
    {
        io::write_atomic(dir / "cfg.json", R"({"gamma_fats": 3})");
        auto rc = config(cli::Command::simulate_decay, dir.path(), "u");
        rc.seed = 1;
        rc.config = dir / "cfg.json";
        auto r = run(rc);
        CHECK(r.outcome.exit_code == cli::kExitUsage);
        CHECK(contains(r.err, "gamma_fats"));
        REQUIRE(fs::exists(r.outcome.run_dir / "error.json"));
        CHECK(read_json(r.outcome.run_dir / "manifest.json")["status"] == "failed");
    }
    SUBCASE("malformed CSV reports file and line")
    {
        io::write_atomic(dir / "bad.csv", "time_ns,counts\n0,1\n0.025,x\n");
        auto rc = config(cli::Command::fit_decay, dir.path(), "b");
        rc.inputs = {dir / "bad.csv"};
        auto r = run(rc);
        CHECK(r.outcome.exit_code == cli::kExitUsage);
        CHECK(contains(r.err, "bad.csv:3"));
    }
    SUBCASE("a histogram without signal is a numerical failure")
    {
        AcquisitionConfig acq;
        InstrumentResponse irf;
        auto h = sample_histogram(std::vector<double>(acq.bins(), 4.0), 3, irf, acq);
        io::write_atomic(dir / "flat.csv", io::histogram_csv(h));
        auto rc = config(cli::Command::fit_decay, dir.path(), "n");
        rc.inputs = {dir / "flat.csv"};
        auto r = run(rc);
        CHECK(r.outcome.exit_code == cli::kExitNumerical);
        CHECK(contains(r.err, "degenerate-input"));
        CHECK(fs::exists(r.outcome.run_dir / "fits.json"));
    }
}

TEST_CASE("spectrum, tuning and beta commands")
{
    TempDir dir("cmds");
    SUBCASE("fit-spectrum")
    {
        io::write_atomic(dir / "pl.csv", io::spectrum_csv(fixtures::edge_spectrum(8)));
        auto rc = config(cli::Command::fit_spectrum, dir.path(), "s");
        rc.inputs = {dir / "pl.csv"};
        rc.plot = true;
        auto r = run(rc);
        REQUIRE(r.outcome.exit_code == cli::kExitOk);
        auto m = read_json(r.outcome.run_dir / "model.json");
        CHECK(m["gaussian"]["center_nm"].get<double>() == doctest::Approx(968.7).epsilon(1e-4));
        CHECK(m["lorentzians"].size() == 5);
        CHECK(fs::exists(r.outcome.run_dir / "spectrum.svg"));
    }
    SUBCASE("calibrate with tuning data")
    {
        io::TuningData edge{"edge", {}, {}}, qd{"qd", {}, {}};
        for (double t = 10; t <= 60; t += 5) {
            edge.temperatures_k.push_back(t);
            edge.wavelengths_nm.push_back(968.0 + 0.02 * (t - 35));
            qd.temperatures_k.push_back(t);
            qd.wavelengths_nm.push_back(968.0 + 0.05 * (t - 35));
        }
        io::write_atomic(dir / "edge.csv", io::tuning_csv(edge));
        io::write_atomic(dir / "QD3.csv", io::tuning_csv(qd));
        auto rc = config(cli::Command::calibrate, dir.path(), "t");
        rc.edge = dir / "edge.csv";
        rc.inputs = {dir / "QD3.csv"};
        auto r = run(rc);
        REQUIRE(r.outcome.exit_code == cli::kExitOk);
        auto j = read_json(r.outcome.run_dir / "tuning.json");
        CHECK(j["emitters"][0]["resonance"]["temperature_K"].get<double>() == doctest::Approx(35.0));
        CHECK(j["emitters"][0]["shift_rate_nm_per_K"].get<double>() == doctest::Approx(0.05));
        CHECK(j["emitters"][0]["detuning"].size() == 11);
    }
    SUBCASE("extract-beta")
    {
        RateVsDetuning s;
        s.points = {{-1.0, 3.1, 0.1, 10, true}, {-0.2, 5.7, 0.2, 20, true}, {0.5, 1.4, 0.05, 40, true},
                    {0.9, 0.8, 0.04, 50, true}};
        io::write_atomic(dir / "QD3.csv", io::rates_csv(s));
        auto rc = config(cli::Command::extract_beta, dir.path(), "b");
        rc.inputs = {dir / "QD3.csv"};
        rc.plot = true;
        auto r = run(rc);
        REQUIRE(r.outcome.exit_code == cli::kExitOk);
        auto j = read_json(r.outcome.run_dir / "beta_report.json");
        REQUIRE(j.is_array());
        CHECK(j[0]["label"] == "QD3");
        CHECK(j[0]["beta"].get<double>() == doctest::Approx(1.0 - 0.8 / 5.7));
        CHECK(j[0]["purcell"].get<double>() == doctest::Approx(5.7 / 1.1));
        CHECK(j[0]["lower_bound"] == true);
        CHECK(contains(r.out, "QD3"));
        CHECK(fs::exists(r.outcome.run_dir / "rates.svg"));
    }
}

TEST_CASE("bands on a coarse basis")
{
    TempDir dir("bands");
    io::write_atomic(dir / "w1.txt", "effective_index = 2.764891\n");
    io::write_atomic(dir / "cfg.json", R"({"cutoff": 3, "k_samples": 32})");
    auto rc = config(cli::Command::bands, dir.path(), "x");
    rc.geometry = dir / "w1.txt";
    rc.config = dir / "cfg.json";
    rc.plot = true;
    auto r = run(rc);
    REQUIRE(r.outcome.exit_code == cli::kExitOk);
    auto table = io::load_csv(r.outcome.run_dir / "dispersion.csv");
    CHECK(table.rows.size() >= 2);
    auto edge = read_json(r.outcome.run_dir / "band_edge.json");
    CHECK(edge["band_edge_wavelength_nm"].get<double>() > 950.0);
    CHECK(edge["band_edge_wavelength_nm"].get<double>() < 990.0);
    CHECK(fs::exists(r.outcome.run_dir / "rate_curve.csv"));
    CHECK(fs::exists(r.outcome.run_dir / "dispersion.svg"));
    CHECK(read_json(r.outcome.run_dir / "manifest.json")["geometry"]["effective_index"] == 2.764891);
}
