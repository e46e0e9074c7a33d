// Command-line front end: resolve a device config, bind an experiment preset,
// run it, and report threshold outcomes.  Exit 0 = all thresholds met,
// 1 = a threshold failed, 2 = configuration or runtime error.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <cqmsim/presets.hpp>

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo bench for loop-based storage of polarization entanglement"};
    std::string config_path;
    std::string preset_name;
    std::string out_dir = "cqmsim-out";
    std::uint64_t seed = 0;
    double trials_scale = 1.0;
    unsigned threads = 1;

    app.add_option("--config", config_path, "device/run configuration (INI)");
    app.add_option("--preset", preset_name, "experiment preset")
        ->required()
        ->check(CLI::IsMember(
            {"calibrate-sweep", "store-entanglement", "loss-vs-n", "schedule-check"}));
    auto* seed_opt =
        app.add_option("--seed", seed, "master seed (overrides the config file)");
    app.add_option("--out-dir", out_dir, "output directory [cqmsim-out]");
    app.add_option("--trials-scale", trials_scale, "exposure multiplier [1.0]")
        ->check(CLI::PositiveNumber);
    app.add_option("--threads", threads, "worker threads [1]");
    CLI11_PARSE(app, argc, argv);

    try {
        cqmsim::RunConfig base;
        bool overridden = false;
        if (!config_path.empty()) {
            base = cqmsim::load_config(config_path);
            overridden = true;
        }
        if (seed_opt->count() > 0) base.seed = seed;

        auto preset = cqmsim::make_preset(*cqmsim::parse_preset_name(preset_name), base,
                                          overridden, trials_scale);
        auto outcome = cqmsim::run_preset(preset, out_dir, threads);

        for (const auto& t : outcome.report["thresholds"]) {
            std::cout << (t["ok"].get<bool>() ? "[ok]   " : "[FAIL] ")
                      << t["name"].get<std::string>();
            if (t.contains("value"))
                std::cout << " = " << cqmsim::format_double(t["value"].get<double>())
                          << " (expected " << cqmsim::format_double(t["min"].get<double>())
                          << " .. " << cqmsim::format_double(t["max"].get<double>()) << ")";
            else if (t.contains("detail") && !t["detail"].get<std::string>().empty())
                std::cout << " -- " << t["detail"].get<std::string>();
            std::cout << "\n";
        }
        std::cout << (outcome.passed ? "PASSED" : "FAILED") << "  (outputs in " << out_dir
                  << ")\n";
        return outcome.passed ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
