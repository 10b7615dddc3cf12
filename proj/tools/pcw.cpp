#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcw/cli.hpp"

int main(int argc, char** argv)
{
    namespace cli = pcw::cli;
    CLI::App app{"Photonic-crystal waveguide emitter toolkit: bands, decay simulation and fitting, spectra, "
                 "tuning calibration and beta-factor extraction"};
    app.set_version_flag("--version", PCW_VERSION);

    std::string command;
    std::vector<std::string> inputs;
    std::string out = ".", geometry, config, manifest, edge, timestamp;
    std::uint64_t seed = 0;
    bool plot = false;

    std::string names;
    for (const auto& n : cli::command_names())
        names += (names.empty() ? "" : ", ") + n;
    app.add_option("command", command, "One of: " + names)->required()->check(CLI::IsMember(cli::command_names()));
    app.add_option("inputs", inputs, "Input files for the command");
    app.add_option("--out", out, "Output directory; each run writes <out>/<command>-<timestamp>/")
        ->capture_default_str();
    auto* seed_opt = app.add_option("--seed", seed, "Random seed (required for simulate-decay)");
    app.add_flag("--plot", plot, "Also write SVG plots");
    app.add_option("--geometry", geometry, "Waveguide geometry (JSON or key = value lines)");
    app.add_option("--config", config, "JSON object of command options");
    app.add_option("--manifest", manifest, "fit-decay: batch manifest listing histogram files");
    app.add_option("--edge", edge, "calibrate: band-edge tuning CSV (temperature_K,wavelength_nm)");
    app.add_option("--timestamp", timestamp, "Run directory suffix instead of the current UTC time");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : cli::kExitUsage;
    }

    cli::RunConfig rc;
    rc.command = *cli::parse_command(command);
    for (const auto& i : inputs)
        rc.inputs.emplace_back(i);
    rc.out_dir = out;
    if (seed_opt->count())
        rc.seed = seed;
    rc.plot = plot;
    if (!geometry.empty())
        rc.geometry = geometry;
    if (!config.empty())
        rc.config = config;
    if (!manifest.empty())
        rc.manifest = manifest;
    if (!edge.empty())
        rc.edge = edge;
    rc.timestamp = timestamp;
    rc.argv.assign(argv, argv + argc);

    const auto outcome = cli::run(rc, std::cout, std::cerr);
    if (!outcome.run_dir.empty())
        std::cerr << "results in " << outcome.run_dir.string() << '\n';
    return outcome.exit_code;
}
