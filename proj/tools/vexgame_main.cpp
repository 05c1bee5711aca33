#include <cstring>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "vexgame/vexgame.hpp"

namespace {

bool starts_with(const char* msg, const char* prefix) {
    return std::strncmp(msg, prefix, std::strlen(prefix)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Value solver and simulator for repeated games where one side "
                 "knows the state and the other only sees play"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    unsigned long long seed_override = 0;
    for (const char* verb : {"solve", "simulate", "match", "diagnose"}) {
        CLI::App* sub = app.add_subcommand(verb, "");
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--seed", seed_override, "override the config seed");
        sub->add_option("--out", out_override, "directory for report and CSV artifacts");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string verb = sub->get_name();
    try {
        vexgame::RunConfig cfg = vexgame::load_config(config_path);
        if (!cfg.command.empty() && cfg.command != verb)
            throw std::invalid_argument("validation-error: config names command '" +
                                        cfg.command + "' but '" + verb + "' was invoked");
        cfg.command = verb;
        if (sub->count("--seed")) cfg.seed = seed_override;
        if (sub->count("--out")) cfg.out = out_override;
        vexgame::RunOutcome outcome = vexgame::run(cfg);
        std::cout << outcome.report.dump(2) << "\n";
        return outcome.exit_code;
    } catch (const std::invalid_argument& e) {
        if (starts_with(e.what(), "parse-error") || starts_with(e.what(), "validation-error")) {
            std::cerr << e.what() << "\n";
            return 2;
        }
        std::cerr << "internal-error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal-error: " << e.what() << "\n";
        return 3;
    }
}
