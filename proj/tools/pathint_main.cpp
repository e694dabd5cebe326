// pathint: configuration-driven experiments for finite-dimensional
// approximations of Wiener measure on model manifolds.
//
// Subcommands: simulate | converge | ibp-check | trichotomy |
//              heat-kernel-check | free-path | replay
// Exit codes: 0 = all declared checks passed, 1 = a check failed or a
// numerical error occurred, 2 = configuration error (no artifacts written).

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "pathint/experiment.hpp"
#include "pathint/version.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string seed;
    std::string samples;
    std::string out;
    std::string workers;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key = value configuration file");
    cmd->add_option("--seed", args.seed, "base RNG seed (u64)");
    cmd->add_option("--samples", args.samples, "Monte Carlo sample count");
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--workers", args.workers,
                    "worker threads (also PATHINT_WORKERS; results do not depend on it)");
}

int dispatch(const std::string& experiment, const CommonArgs& args) {
    pathint::ConfigFile file;
    const pathint::ConfigFile* file_ptr = nullptr;
    if (!args.config_path.empty()) {
        file = pathint::ConfigFile::parse_file(args.config_path);
        file_ptr = &file;
    }
    std::map<std::string, std::string> overrides;
    if (!args.seed.empty()) overrides["seed"] = args.seed;
    if (!args.samples.empty()) overrides["samples"] = args.samples;
    if (!args.out.empty()) overrides["out"] = args.out;
    if (!args.workers.empty()) overrides["workers"] = args.workers;
    pathint::RunConfig cfg = pathint::resolve_config(experiment, file_ptr, overrides);
    if (const std::string* w = cfg.find("run", "workers")) {
        setenv("PATHINT_WORKERS", w->c_str(), 1);
    }
    const pathint::RunOutcome outcome = pathint::run_experiment(cfg);
    std::cout << outcome.summary;
    return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-dimensional Wiener measure approximations on model manifolds"};
    app.set_version_flag("--version", PATHINT_VERSION);
    app.require_subcommand(1);

    const std::vector<std::string> experiments{"simulate",          "converge",
                                               "ibp-check",         "trichotomy",
                                               "heat-kernel-check", "free-path"};
    std::map<std::string, CommonArgs> args;
    for (const std::string& name : experiments) {
        CLI::App* cmd = app.add_subcommand(name, name + " experiment");
        add_common(cmd, args[name]);
    }

    std::string manifest_path, replay_out;
    CLI::App* replay = app.add_subcommand("replay", "re-run an experiment from its manifest");
    replay->add_option("--manifest", manifest_path, "manifest.json from a prior run")
        ->required();
    replay->add_option("--out", replay_out, "output directory override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (replay->parsed()) {
            const pathint::RunOutcome outcome =
                pathint::replay_manifest(manifest_path, replay_out);
            std::cout << outcome.summary;
            return outcome.exit_code;
        }
        for (const std::string& name : experiments)
            if (app.get_subcommand(name)->parsed()) return dispatch(name, args[name]);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const pathint::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
