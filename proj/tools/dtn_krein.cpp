#include "dtnkrein/config.hpp"
#include "dtnkrein/driver.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string preset;
    bool quiet = false;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "configuration file (key = value lines)");
    sub->add_option("--out", f.out, "output directory (overrides output.dir)");
    sub->add_option("--seed", f.seed, "64-bit seed (overrides seed)");
    sub->add_option("--preset", f.preset,
                    "model preset: toy, path3, random, laplacian, anisotropic, affine, coupled");
    sub->add_flag("--quiet", f.quiet, "print nothing on success");
}

}  // namespace

int main(int argc, char** argv) {
    using namespace dtnkrein;

    CLI::App app{"Dirichlet-to-Neumann maps, Krein resolvent and trace identities on discrete elliptic models"};
    app.require_subcommand(1);
    Flags flags;
    struct Entry {
        const char* name;
        Command cmd;
        const char* help;
    };
    const Entry entries[] = {
        {"verify", Command::verify, "check the Q-function, Krein, trace and Nevanlinna identities"},
        {"dtn-sweep", Command::dtn_sweep, "tabulate spectral data of Q over the sample points"},
        {"characterize", Command::characterize, "report the structural conditions and simplicity"},
        {"couple-verify", Command::couple_verify, "check the transmission (coupled) identities"},
    };
    for (const Entry& e : entries) add_flags(app.add_subcommand(e.name, e.help), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    Command cmd = Command::verify;
    for (const Entry& e : entries) {
        if (app.got_subcommand(e.name)) cmd = e.cmd;
    }

    RunConfig cfg;
    try {
        if (!flags.config.empty()) cfg = load_config(flags.config);
        if (!flags.preset.empty()) apply_preset(cfg, flags.preset);
        if (flags.seed) cfg.seed = *flags.seed;
        if (!flags.out.empty()) cfg.out_dir = flags.out;
    } catch (const Error& e) {
        std::cerr << "dtn-krein: " << e.what() << "\n";
        return kExitConfig;
    }
    return execute(cmd, cfg, std::cout, std::cerr, flags.quiet);
}
