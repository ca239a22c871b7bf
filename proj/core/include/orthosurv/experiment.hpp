// experiment.hpp
//
// Configuration-driven experiment runner and its reports.
//
// Config files hold one `key = value` per line; `#` starts a comment and lists
// are comma separated. Keys:
//
//   scenario, settings, data, data.t_max, n_train, n_test, seeds, horizons,
//   schemes, plugin, true_nuisances, rmst, clip_eps, rho_guard,
//   clamp_negative_rho, crossfit, folds, threads, out,
//   propensity.*, hazard.*, second_stage.*  (hidden, activation, optimizer,
//   epochs, batch_size, learning_rate, dropout; second_stage also takes
//   val_fraction and patience)
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "orthosurv/nuisance.hpp"
#include "orthosurv/orthogonal.hpp"
#include "orthosurv/second_stage.hpp"
#include "orthosurv/weighting.hpp"

namespace orthosurv {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error("config error in '" + field + "': " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct ExperimentConfig {
    int scenario = 1;
    std::vector<std::string> settings{"full"};  // violation names, '+' composes
    std::string data_path;                      // non-empty: load a CSV instead
    std::optional<int> data_t_max;
    std::size_t n_train = 30000;
    std::size_t n_test = 3000;
    std::vector<std::uint64_t> seeds{1};
    std::vector<int> horizons{0, 1, 2, 3, 4, 5};
    std::vector<WeightScheme> schemes{kAllSchemes.begin(), kAllSchemes.end()};
    bool plugin = true;
    bool true_nuisances = false;
    bool rmst = false;
    NuisanceConfig nuisance = default_nuisance_config();
    SecondStageConfig second_stage = default_second_stage_config();
    PseudoRowOptions pseudo;
    std::string out_dir = "results";
    int threads = 1;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
// Throws ConfigError naming the field.
void validate_config(const ExperimentConfig& cfg);

struct ResultRow {
    std::string scheme;  // scheme name or "plugin"
    std::string setting;
    int horizon = 0;
    std::uint64_t seed = 0;
    double pehe = 0.0;  // NaN when no ground truth is available
    double theta_hat = 0.0;
    std::size_t n_guarded = 0;
    std::size_t n_negative_rho = 0;
    double train_loss_final = 0.0;
    double val_loss_final = 0.0;
    std::vector<double> train_trace;
    std::vector<double> val_trace;
};

struct ExperimentResults {
    std::vector<std::string> schemes;  // report order, plug-in last
    std::vector<std::string> settings;
    std::vector<int> horizons;
    std::vector<std::uint64_t> seeds;
    std::vector<ResultRow> rows;  // ordered by setting, seed, horizon, scheme
};

ExperimentResults run_experiment(const ExperimentConfig& cfg);

std::string format_results_csv(const ExperimentResults& r);
std::string format_traces_csv(const ExperimentResults& r);
// Per-seed PEHE averaged over horizons, then mean and sd over seeds, x1e4.
std::string format_summary_markdown(const ExperimentResults& r);
std::string format_summary_csv(const ExperimentResults& r);
// One row per horizon; one column per (setting, scheme) with the ratio of
// seed-averaged PEHE against scheme "none".
std::string format_ratio_csv(const ExperimentResults& r);

// "mean ± sd" in units of 1e-4 with two decimals.
std::string format_cell(double mean, double sd);

// Writes results.csv, traces.csv, summary.md, summary.csv and ratios.csv.
void emit_report(const ExperimentResults& r, const std::string& out_dir);

// Per-seed, per-horizon PEHE of one scheme in one setting.
std::vector<std::vector<double>> pehe_table(const ExperimentResults& r, const std::string& scheme,
                                            const std::string& setting);

}  // namespace orthosurv
