// Command-line front end: scenario runs, the embedded acceptance suite, and
// the limit-recovery table. Exit codes: 0 success, 2 config error, 3 numerical
// abort, 4 results flagged unreliable without --override-flags.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "scenario.hpp"
#include "selftest.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hybridqm: pseudo-spectral toolkit for deformed one-dimensional kinematics"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    bool override_flags = false;
    CLI::App* run = app.add_subcommand("run", "execute a scenario config and write artifacts");
    run->add_option("config", config_path, "path to a scenario JSON file")->required();
    run->add_option("--out", out_dir, "output directory (overrides output.directory)");
    run->add_flag("--override-flags", override_flags,
                  "exit 0 even when results carry reliability flags");

    CLI::App* self = app.add_subcommand("selftest", "run the acceptance criteria end to end");

    double q = 0.0, alpha = 0.0;
    CLI::App* limits = app.add_subcommand("limits", "print the limit-recovery table");
    limits->add_option("--q", q, "deformation parameter (q != 1)")->required();
    limits->add_option("--alpha", alpha, "spectral exponent in (1, 2]")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return hybridqm::scenario::run_scenario(config_path, out_dir, override_flags,
                                                    std::cout);
        if (self->parsed())
            return hybridqm::selftest::run_all(std::cout) == 0 ? 0 : 1;
        if (limits->parsed())
            return hybridqm::scenario::print_limits(q, alpha, std::cout);
    } catch (const hybridqm::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hybridqm::numeric_error& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
