// mobilectl: run one experiment from a TOML config into a run directory.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mobilectl/config.hpp"
#include "mobilectl/error.hpp"
#include "mobilectl/harness.hpp"

using namespace mobilectl;

int main(int argc, char** argv) {
    CLI::App app{"Controls for 1D parabolic problems with moving multiplicative support"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    const char* verbs[][2] = {
        {"solve", "forward solve, optional static control and closed-form comparison"},
        {"sweep", "damping sweep driving the state below eps/2"},
        {"pipeline", "sweep, additive steering and lifting to a multiplicative control"},
        {"picard", "fixed-point loop for a state-dependent diffusion a(y)"},
        {"certify", "maximum-principle and energy certificates on one solve"},
        {"witness", "random-control batch against the lower envelope on a probe"},
    };
    for (const auto& [name, help] : verbs) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "experiment config (TOML)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "run directory")->required();
        sub->add_option("--override", overrides, "dotted.key=value, applied after the file")->take_all();
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }
    const std::string verb = app.get_subcommands().front()->get_name();

    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path, overrides);
        if (to_string(cfg.kind) != verb) {
            throw Error(ErrorKind::Config, "config declares experiment '" + std::string(to_string(cfg.kind)) +
                                               "' but the verb is '" + verb + "'");
        }
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    RunArtifact art;
    try {
        art = run_experiment(cfg, out_dir);
    } catch (const Error& e) {
        std::cerr << (e.kind() == ErrorKind::Config ? "config error: " : "error: ") << e.what() << "\n";
        return e.kind() == ErrorKind::Config ? kExitConfig : kExitInternal;
    }

    for (const auto& r : art.reports) {
        std::printf("%-32s %-12s margin %.3e\n", r.name.c_str(), to_string(r.verdict), r.margin());
    }
    if (art.terminal_error >= 0.0) std::printf("terminal error %.6e\n", art.terminal_error);
    if (art.failed) std::fprintf(stderr, "run failed: %s\n", art.error.c_str());
    std::printf("%s -> %s\n", out_dir.c_str(), art.all_passed() ? "pass" : "FAIL");
    return art.exit_code();
}
