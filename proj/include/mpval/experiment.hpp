#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "mpval/gaussian_model.hpp"
#include "mpval/mappings.hpp"
#include "mpval/portfolio.hpp"

namespace mpval {

/// Invalid configuration; messages name the offending config key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A declarative experiment: one subcommand plus its inputs. `raw` keeps the
/// resolved config that result files echo; the worker count is an execution
/// detail and is not part of it.
struct ExperimentConfig {
    std::string kind;
    std::uint64_t seed = 1;
    int workers = 0;
    std::string output;
    nlohmann::json raw;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Executes the experiment and writes <output>.json and <output>.csv.
/// Throws ConfigError for validation problems. Timing goes to stderr so the
/// result files stay byte-identical across runs and worker counts.
void run_experiment(const ExperimentConfig& config);

// JSON builders for the config vocabulary; shared by the runner and tests.
SpectralMeasure measure_from_json(const nlohmann::json& j);
OneStepMapping mapping_from_json(const nlohmann::json& j);
ValuationSchedule schedule_from_json(const nlohmann::json& j, int horizon);
GaussianModel gaussian_model_from_json(const nlohmann::json& j);
PortfolioModel portfolio_model_from_json(const nlohmann::json& j);

}  // namespace mpval
