#include "latticespin/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Finite-volume spin chain experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", latticespin::library_version());

    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    std::string config;
    std::string out;
    int threads = 0;
    run->add_option("config", config, "Config file")->required();
    run->add_option("--out", out, "Output directory (overrides the config)");
    run->add_option("--threads", threads, "Worker threads (overrides the config and LATTICESPIN_THREADS)")
        ->check(CLI::PositiveNumber);

    app.add_subcommand("schema", "Print the config JSON schema");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : latticespin::kExitUsage;
    }

    if (app.got_subcommand("schema")) {
        std::cout << latticespin::config_schema().dump(2) << "\n";
        return 0;
    }

    latticespin::RunOptions options;
    if (!out.empty()) options.out = out;
    if (threads > 0) options.threads = threads;
    const auto result = latticespin::run_config_file(config, options);
    if (result.exit_code != latticespin::kExitOk) std::cerr << result.summary["errors"].dump(2) << "\n";
    std::cout << (result.out_dir / "summary.json").string() << "\n";
    return result.exit_code;
}
