#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "mpval/experiment.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::int64_t seed = -1;
    int workers = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
    auto* opt = cmd->add_option("--config", flags.config_path, "experiment config file (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--seed", flags.seed, "override the config seed");
    cmd->add_option("--workers", flags.workers, "worker threads (0 = hardware)");
}

mpval::ExperimentConfig make_config(const std::string& kind, const CommonFlags& flags) {
    mpval::ExperimentConfig config = mpval::load_config(flags.config_path);
    if (config.kind != kind)
        throw mpval::ConfigError("config key 'run': expected '" + kind + "', found '" + config.kind + "'");
    if (flags.seed >= 0) {
        config.seed = static_cast<std::uint64_t>(flags.seed);
        config.raw["seed"] = config.seed;
    }
    if (flags.workers >= 0) config.workers = flags.workers;
    return config;
}

std::vector<double> parse_csv_doubles(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw mpval::ConfigError("flag --c: '" + item + "' is not a number");
        }
    }
    if (out.empty()) throw mpval::ConfigError("flag --c: empty list");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-period liability valuation: scenario-tree recursions, "
                 "Gaussian closed forms and convergence experiments"};
    app.require_subcommand(1);

    CommonFlags value_tree_flags, value_gaussian_flags, simulate_flags, converge_flags, compare_flags;
    add_common(app.add_subcommand("value-tree", "backward recursion on a scenario tree"),
               value_tree_flags);
    add_common(app.add_subcommand("value-gaussian", "closed-form value of a Gaussian model"),
               value_gaussian_flags);
    add_common(app.add_subcommand("simulate", "replicate compound cashflow simulations"),
               simulate_flags);
    add_common(app.add_subcommand("converge", "large-portfolio convergence experiment"),
               converge_flags);
    add_common(app.add_subcommand("compare-filtrations", "value ordering under nested information"),
               compare_flags);

    CommonFlags lemma_flags;
    std::string lemma_c;
    double lemma_step = 0.02;
    std::string lemma_output = "lemma-check-result";
    auto* lemma_cmd = app.add_subcommand("lemma-check", "brute-force check of the square-root program");
    add_common(lemma_cmd, lemma_flags, /*config_required=*/false);
    lemma_cmd->add_option("--c", lemma_c, "profile entries, comma separated (e.g. 0.5,0.3,0.2)");
    lemma_cmd->add_option("--step", lemma_step, "simplex grid step; must divide 1");
    lemma_cmd->add_option("--output", lemma_output, "output path prefix");

    CLI11_PARSE(app, argc, argv);

    try {
        mpval::ExperimentConfig config;
        if (app.got_subcommand("value-tree")) config = make_config("value-tree", value_tree_flags);
        else if (app.got_subcommand("value-gaussian")) config = make_config("value-gaussian", value_gaussian_flags);
        else if (app.got_subcommand("simulate")) config = make_config("simulate", simulate_flags);
        else if (app.got_subcommand("converge")) config = make_config("converge", converge_flags);
        else if (app.got_subcommand("compare-filtrations"))
            config = make_config("compare-filtrations", compare_flags);
        else {
            if (!lemma_flags.config_path.empty()) {
                config = make_config("lemma-check", lemma_flags);
            } else {
                if (lemma_c.empty()) throw mpval::ConfigError("lemma-check needs --c or --config");
                nlohmann::json j;
                j["run"] = "lemma-check";
                j["output"] = lemma_output;
                j["lemma"]["c"] = parse_csv_doubles(lemma_c);
                j["lemma"]["step"] = lemma_step;
                if (lemma_flags.seed >= 0) j["seed"] = lemma_flags.seed;
                config = mpval::parse_config(j);
                if (lemma_flags.workers >= 0) config.workers = lemma_flags.workers;
            }
        }
        mpval::run_experiment(config);
        return 0;
    } catch (const mpval::ConfigError& e) {
        std::cerr << "mpval: config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "mpval: config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "mpval: error: " << e.what() << '\n';
        return 1;
    }
}
