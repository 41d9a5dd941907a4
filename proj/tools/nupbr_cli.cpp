// nupbr command-line front end.
//
//   nupbr <validate|cones|numeraire|deflate|verify|report> --model PATH
//         [--mode grid|lattice] [--tol X] [--seed N] [--format json|csv] [--out PATH]

#include "nupbr/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

int main(int argc, char** argv) {
    using namespace nupbr::cli;

    CLI::App app{"Numeraire portfolios, arbitrage cones and local martingale deflators"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1, 1);

    RunConfig cfg;
    std::string out_path;
    const std::map<std::string, Mode> modes{{"grid", Mode::PointwiseGrid}, {"lattice", Mode::Lattice}};
    const std::map<std::string, Format> formats{{"json", Format::Json}, {"csv", Format::Csv}};

    const std::pair<const char*, const char*> commands[] = {
        {"validate", "check characteristics and lattice structure"},
        {"cones", "null space N and immediate arbitrage per slice or node"},
        {"numeraire", "pre-numeraire proportions, growth and optimality certificate"},
        {"deflate", "numeraire change, rebalancing and the deflator bundle"},
        {"verify", "martingale check of the deflator against sampled strategies (CSV by default)"},
        {"report", "full pipeline with provenance"}};
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--model", cfg.model_path, "model file (JSON)")->required();
        sub->add_option("--mode", cfg.mode, "grid | lattice")
            ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case))
            ->default_str("lattice");
        sub->add_option("--tol", cfg.tolerance, "verification tolerance")->default_val(1e-10);
        sub->add_option("--seed", cfg.seed, "seed for verification sampling")->default_val(1);
        sub->add_option("--format", cfg.output_format, "json | csv")
            ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
        sub->add_option("--strategies", cfg.verify_strategies, "random strategies for verify")
            ->default_val(100)
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--out", out_path, "output file (default stdout)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    cfg.command = *parse_command(app.get_subcommands().front()->get_name());

    const RunResult res = run(cfg);
    std::cerr << res.diagnostics;
    if (res.exit_code != 1) {
        if (out_path.empty()) {
            std::cout << res.output;
        } else {
            std::ofstream out(out_path, std::ios::binary);
            if (!out) {
                std::cerr << "error: cannot write '" << out_path << "'\n";
                return 1;
            }
            out << res.output;
        }
    }
    return res.exit_code;
}
