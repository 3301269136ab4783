#include "treeamp/errors.hpp"
#include "treeamp/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

using namespace treeamp;

namespace {

std::vector<double> parse_grid(const std::string &s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stod(tok));
    return out;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"treeamp: inference on tree-structured factor graphs"};
    app.require_subcommand(1);

    std::string config, out;
    auto *run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", config, "config JSON")->required();
    run->add_option("--out", out, "output directory (overrides the config)");

    auto *validate = app.add_subcommand("validate", "check a config without running it");
    validate->add_option("config", config, "config JSON")->required();

    std::string suite, grid;
    BenchOptions bo;
    auto *bench = app.add_subcommand("bench", "run a benchmark suite");
    bench->add_option("suite", suite, "suite name")->required()->check(CLI::IsMember(benchmark_names()));
    bench->add_option("--n", bo.n, "signal dimension");
    bench->add_option("--alpha-grid", grid, "comma-separated alpha values");
    bench->add_option("--instances", bo.instances, "instances per grid point");
    bench->add_option("--seed", bo.seed, "base seed");
    bench->add_option("--out", bo.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return run_config_file(config, std::cerr, out);
        if (*validate) {
            validate_config(load_config(config));
            std::cout << "ok\n";
            return kExitOk;
        }
        if (!grid.empty()) bo.alpha_grid = parse_grid(grid);
        if (bo.out_dir.empty()) bo.out_dir = "treeamp_" + suite;
        BenchResult res = run_benchmark(suite, bo);
        write_benchmark(res, bo.out_dir);
        std::cout << res.summary.dump(2) << '\n';
        return res.converged ? kExitOk : kExitNotConverged;
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NotConverged &e) {
        std::cerr << "not converged: " << e.what() << '\n';
        return kExitNotConverged;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
