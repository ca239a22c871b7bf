#include "orthosurv/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>
#include <type_traits>

#include "orthosurv/evaluation.hpp"
#include "orthosurv/io.hpp"
#include "orthosurv/synthetic.hpp"

namespace orthosurv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix(splitmix(seed ^ splitmix(a)) + b);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    if constexpr (std::is_unsigned_v<T>) {
        if (v.find('-') != std::string::npos) throw ConfigError(key, "must not be negative");
    }
    std::istringstream ss(v);
    T out{};
    ss >> out;
    if (!ss || !(ss >> std::ws).eof()) throw ConfigError(key, "cannot parse '" + v + "'");
    return out;
}

template <class T>
std::vector<T> parse_number_list(const std::string& key, const std::string& v) {
    std::vector<T> out;
    for (const auto& item : split_list(v)) out.push_back(parse_number<T>(key, item));
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

void set_net_field(ApproxConfig& net, const std::string& key, const std::string& field,
                   const std::string& v) {
    if (field == "hidden") {
        net.hidden_layers = parse_number_list<std::size_t>(key, v);
    } else if (field == "activation") {
        if (v == "logistic") net.hidden_activation = HiddenActivation::logistic;
        else if (v == "tanh") net.hidden_activation = HiddenActivation::tanh;
        else if (v == "relu") net.hidden_activation = HiddenActivation::relu;
        else throw ConfigError(key, "unknown activation '" + v + "'");
    } else if (field == "optimizer") {
        if (v == "sgd") net.optimizer = Optimizer::sgd;
        else if (v == "adam") net.optimizer = Optimizer::adam;
        else throw ConfigError(key, "unknown optimizer '" + v + "'");
    } else if (field == "epochs") {
        net.epochs = parse_number<int>(key, v);
    } else if (field == "batch_size") {
        net.batch_size = parse_number<std::size_t>(key, v);
    } else if (field == "learning_rate") {
        net.learning_rate = parse_number<double>(key, v);
    } else if (field == "dropout") {
        net.dropout_rate = parse_number<double>(key, v);
    } else {
        throw ConfigError(key, "unknown key");
    }
}

void set_field(ExperimentConfig& c, const std::string& key, const std::string& v) {
    const auto dot = key.find('.');
    if (dot != std::string::npos && key != "data.t_max") {
        const std::string section = key.substr(0, dot);
        const std::string field = key.substr(dot + 1);
        if (section == "propensity") return set_net_field(c.nuisance.propensity, key, field, v);
        if (section == "hazard") return set_net_field(c.nuisance.hazard, key, field, v);
        if (section == "second_stage") {
            if (field == "val_fraction") c.second_stage.val_fraction = parse_number<double>(key, v);
            else if (field == "patience") c.second_stage.patience = parse_number<int>(key, v);
            else set_net_field(c.second_stage.net, key, field, v);
            return;
        }
        throw ConfigError(key, "unknown section");
    }
    if (key == "scenario") c.scenario = parse_number<int>(key, v);
    else if (key == "settings" || key == "setting") c.settings = split_list(v);
    else if (key == "data") c.data_path = v;
    else if (key == "data.t_max") c.data_t_max = parse_number<int>(key, v);
    else if (key == "n_train") c.n_train = parse_number<std::size_t>(key, v);
    else if (key == "n_test") c.n_test = parse_number<std::size_t>(key, v);
    else if (key == "seeds") c.seeds = parse_number_list<std::uint64_t>(key, v);
    else if (key == "horizons") c.horizons = parse_number_list<int>(key, v);
    else if (key == "schemes") {
        c.schemes.clear();
        for (const auto& name : split_list(v)) {
            const auto s = parse_scheme(name);
            if (!s) throw ConfigError(key, "unknown scheme '" + name + "'");
            c.schemes.push_back(*s);
        }
    } else if (key == "plugin") c.plugin = parse_bool(key, v);
    else if (key == "true_nuisances") c.true_nuisances = parse_bool(key, v);
    else if (key == "rmst") c.rmst = parse_bool(key, v);
    else if (key == "clip_eps") c.nuisance.clip_eps = parse_number<double>(key, v);
    else if (key == "rho_guard") c.pseudo.rho_guard = parse_number<double>(key, v);
    else if (key == "clamp_negative_rho") c.pseudo.clamp_negative_rho = parse_bool(key, v);
    else if (key == "crossfit") c.nuisance.crossfit = parse_bool(key, v);
    else if (key == "folds") c.nuisance.folds = parse_number<int>(key, v);
    else if (key == "threads") c.threads = parse_number<int>(key, v);
    else if (key == "out") c.out_dir = v;
    else throw ConfigError(key, "unknown key");
}

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void check_net(const std::string& prefix, const ApproxConfig& net) {
    if (net.hidden_layers.empty()) throw ConfigError(prefix + ".hidden", "at least one layer");
    for (auto w : net.hidden_layers) {
        if (w == 0) throw ConfigError(prefix + ".hidden", "widths must be positive");
    }
    if (net.epochs < 1) throw ConfigError(prefix + ".epochs", "must be at least 1");
    if (net.batch_size < 1) throw ConfigError(prefix + ".batch_size", "must be at least 1");
    if (!(net.learning_rate > 0.0)) throw ConfigError(prefix + ".learning_rate", "must be positive");
    if (!(net.dropout_rate >= 0.0 && net.dropout_rate < 1.0)) {
        throw ConfigError(prefix + ".dropout", "must lie in [0,1)");
    }
}

struct JobOutput {
    std::vector<ResultRow> rows;
};

// Cumulative sum over t' <= t of the per-step contrast when rmst is set.
Eigen::VectorXd target_tau(const NuisanceSource& src, const Eigen::MatrixXd& x, int t, bool rmst) {
    if (!rmst) return plugin_tau(src, x, t);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.rows());
    for (int k = 0; k <= t; ++k) acc += plugin_tau(src, x, k);
    return acc;
}

JobOutput run_job(const ExperimentConfig& cfg, const std::string& setting, std::uint64_t seed) {
    Dataset train;
    Dataset test;
    std::shared_ptr<const GroundTruth> truth;
    if (!cfg.data_path.empty()) {
        train = load_csv_dataset(cfg.data_path, cfg.data_t_max);
    } else {
        const Violations v = *parse_violations(setting);
        auto sim = generate(ScenarioSpec{cfg.scenario, v, cfg.n_train, seed});
        train = std::move(sim.data);
        test = generate(ScenarioSpec{cfg.scenario, v, cfg.n_test, derive(seed, 0x7e57)}).data;
        truth = std::make_shared<const GroundTruth>(sim.truth);
    }

    FoldedNuisances fn;
    std::shared_ptr<const NuisanceSource> predictor;
    if (cfg.true_nuisances) {
        fn = FoldedNuisances::single(truth, train.size());
        predictor = truth;
    } else {
        NuisanceConfig nc = cfg.nuisance;
        nc.seed = derive(seed, 0x4e55);
        fn = cross_fit(train, nc);
        predictor = fn.folds() == 1 ? fn.models.front() : std::make_shared<const FoldAverage>(fn.models);
    }
    const auto evaluated = fn.evaluate_rows(train, cfg.nuisance.clip_eps);

    const bool has_test = truth != nullptr && !test.empty();
    const Eigen::MatrixXd x_eval = has_test ? test.covariates() : train.covariates();

    JobOutput out;
    for (int t : cfg.horizons) {
        Eigen::VectorXd truth_tau;
        if (has_test) truth_tau = target_tau(*truth, x_eval, t, cfg.rmst);
        auto score = [&](const Eigen::VectorXd& pred) {
            if (!has_test) return kNaN;
            return pehe(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                        std::span<const double>(truth_tau.data(),
                                                static_cast<std::size_t>(truth_tau.size())));
        };
        for (const WeightScheme scheme : cfg.schemes) {
            const PseudoRowSet rows =
                cfg.rmst ? build_rmst_rows(train, evaluated, scheme, t, cfg.pseudo)
                         : build_pseudo_rows(train, evaluated, scheme, t, cfg.pseudo);
            SecondStageConfig ss = cfg.second_stage;
            // Shared across schemes so paired comparisons differ only in the weighting.
            ss.net.seed = derive(seed, 0x55 + static_cast<std::uint64_t>(t));
            const TauModel model = fit_tau(rows.rows, ss, t, scheme);
            ResultRow r;
            r.scheme = std::string(scheme_name(scheme));
            r.setting = setting;
            r.horizon = t;
            r.seed = seed;
            r.pehe = score(model.predict(x_eval));
            r.theta_hat = theta_hat(rows.rows);
            r.n_guarded = rows.report.n_guarded;
            r.n_negative_rho = rows.report.n_negative_rho;
            r.train_trace = model.train_trace;
            r.val_trace = model.val_trace;
            r.train_loss_final = r.train_trace.empty() ? kNaN : r.train_trace.back();
            r.val_loss_final = r.val_trace.empty() ? kNaN : r.val_trace.back();
            out.rows.push_back(std::move(r));
        }
        if (cfg.plugin) {
            const Eigen::VectorXd pred = target_tau(*predictor, x_eval, t, cfg.rmst);
            ResultRow r;
            r.scheme = "plugin";
            r.setting = setting;
            r.horizon = t;
            r.seed = seed;
            r.pehe = score(pred);
            r.theta_hat = pred.mean();
            r.train_loss_final = kNaN;
            r.val_loss_final = kNaN;
            out.rows.push_back(std::move(r));
        }
    }
    return out;
}


}  // namespace

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno), "expected key = value");
        }
        set_field(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    validate_config(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path);
    return parse_config(in);
}

void validate_config(const ExperimentConfig& c) {
    if (c.data_path.empty()) {
        if (c.scenario != 1 && c.scenario != 2) throw ConfigError("scenario", "must be 1 or 2");
        if (c.settings.empty()) throw ConfigError("settings", "at least one setting");
        for (const auto& s : c.settings) {
            if (!parse_violations(s)) throw ConfigError("settings", "unknown setting '" + s + "'");
        }
        if (c.n_train < 20) throw ConfigError("n_train", "must be at least 20");
        if (c.n_test < 1) throw ConfigError("n_test", "must be at least 1");
        const int t_max = c.scenario == 1 ? 5 : 30;
        for (int h : c.horizons) {
            if (h < 0 || h > t_max) throw ConfigError("horizons", "horizon " + std::to_string(h) + " outside grid");
        }
    } else {
        if (c.true_nuisances) throw ConfigError("true_nuisances", "not available for loaded data");
        if (c.settings.size() != 1) throw ConfigError("settings", "exactly one label for loaded data");
        for (int h : c.horizons) {
            if (h < 0) throw ConfigError("horizons", "negative horizon");
        }
    }
    if (c.schemes.empty()) throw ConfigError("schemes", "at least one scheme");
    if (c.horizons.empty()) throw ConfigError("horizons", "at least one horizon");
    if (c.seeds.empty()) throw ConfigError("seeds", "at least one seed");
    if (c.threads < 1) throw ConfigError("threads", "must be at least 1");
    if (!(c.nuisance.clip_eps > 0.0 && c.nuisance.clip_eps < 0.5)) {
        throw ConfigError("clip_eps", "must lie in (0, 0.5)");
    }
    if (!(c.pseudo.rho_guard >= 0.0)) throw ConfigError("rho_guard", "must be non-negative");
    if (c.nuisance.crossfit && c.nuisance.folds < 2) throw ConfigError("folds", "must be at least 2");
    if (!(c.second_stage.val_fraction >= 0.0 && c.second_stage.val_fraction < 1.0)) {
        throw ConfigError("second_stage.val_fraction", "must lie in [0,1)");
    }
    if (c.second_stage.patience < 1) throw ConfigError("second_stage.patience", "must be at least 1");
    check_net("propensity", c.nuisance.propensity);
    check_net("hazard", c.nuisance.hazard);
    check_net("second_stage", c.second_stage.net);
}

ExperimentResults run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    ExperimentResults res;
    for (auto s : cfg.schemes) res.schemes.emplace_back(scheme_name(s));
    if (cfg.plugin) res.schemes.emplace_back("plugin");
    res.settings = cfg.settings;
    res.horizons = cfg.horizons;
    res.seeds = cfg.seeds;

    const std::size_t n_jobs = cfg.settings.size() * cfg.seeds.size();
    std::vector<JobOutput> outputs(n_jobs);
    std::vector<std::exception_ptr> errors(n_jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < n_jobs; j = next++) {
            try {
                outputs[j] = run_job(cfg, cfg.settings[j / cfg.seeds.size()],
                                     cfg.seeds[j % cfg.seeds.size()]);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), n_jobs);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    for (auto& o : outputs) {
        for (auto& r : o.rows) res.rows.push_back(std::move(r));
    }
    return res;
}

std::string format_results_csv(const ExperimentResults& r) {
    std::string out =
        "scheme,setting,horizon,seed,pehe,theta_hat,n_guarded,n_negative_rho,train_loss_final,"
        "val_loss_final\n";
    for (const auto& row : r.rows) {
        out += row.scheme + ',' + row.setting + ',' + std::to_string(row.horizon) + ',' +
               std::to_string(row.seed) + ',' + fmt_double(row.pehe) + ',' +
               fmt_double(row.theta_hat) + ',' + std::to_string(row.n_guarded) + ',' +
               std::to_string(row.n_negative_rho) + ',' + fmt_double(row.train_loss_final) + ',' +
               fmt_double(row.val_loss_final) + '\n';
    }
    return out;
}

std::string format_traces_csv(const ExperimentResults& r) {
    std::string out = "scheme,setting,horizon,seed,epoch,train_loss,val_loss\n";
    for (const auto& row : r.rows) {
        const std::size_t n = std::max(row.train_trace.size(), row.val_trace.size());
        for (std::size_t e = 0; e < n; ++e) {
            out += row.scheme + ',' + row.setting + ',' + std::to_string(row.horizon) + ',' +
                   std::to_string(row.seed) + ',' + std::to_string(e) + ',' +
                   fmt_double(e < row.train_trace.size() ? row.train_trace[e] : kNaN) + ',' +
                   fmt_double(e < row.val_trace.size() ? row.val_trace[e] : kNaN) + '\n';
        }
    }
    return out;
}

std::vector<std::vector<double>> pehe_table(const ExperimentResults& r, const std::string& scheme,
                                            const std::string& setting) {
    std::vector<std::vector<double>> table(r.seeds.size(), std::vector<double>(r.horizons.size(), kNaN));
    for (const auto& row : r.rows) {
        if (row.scheme != scheme || row.setting != setting) continue;
        const auto sit = std::find(r.seeds.begin(), r.seeds.end(), row.seed);
        const auto hit = std::find(r.horizons.begin(), r.horizons.end(), row.horizon);
        if (sit == r.seeds.end() || hit == r.horizons.end()) continue;
        const auto si = sit - r.seeds.begin();
        const auto hi = hit - r.horizons.begin();
        table[static_cast<std::size_t>(si)][static_cast<std::size_t>(hi)] = row.pehe;
    }
    return table;
}

std::string format_cell(double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f ± %.2f", mean * 1e4, sd * 1e4);
    return buf;
}

namespace {

// Mean and sd over seeds of the horizon-averaged PEHE.
std::pair<double, double> summary_cell(const ExperimentResults& r, const std::string& scheme,
                                       const std::string& setting) {
    std::vector<double> per_seed;
    for (const auto& s : pehe_table(r, scheme, setting)) {
        double acc = 0.0;
        for (double v : s) acc += v;
        per_seed.push_back(acc / static_cast<double>(s.size()));
    }
    return mean_sd(per_seed);
}

}  // namespace

std::string format_summary_markdown(const ExperimentResults& r) {
    std::string out =
        "PEHE (mean squared error of the effect estimate) in units of 1e-4, averaged over "
        "horizons, then mean ± sd across seeds (population sd, divide by n; 0 for one seed).\n\n";
    out += "| scheme |";
    for (const auto& s : r.settings) out += ' ' + s + " |";
    out += "\n|---|";
    for (std::size_t k = 0; k < r.settings.size(); ++k) out += "---|";
    out += '\n';
    for (const auto& scheme : r.schemes) {
        out += "| " + scheme + " |";
        for (const auto& setting : r.settings) {
            const auto [m, sd] = summary_cell(r, scheme, setting);
            out += ' ' + format_cell(m, sd) + " |";
        }
        out += '\n';
    }
    return out;
}

std::string format_summary_csv(const ExperimentResults& r) {
    std::string out = "# pehe x1e4 averaged over horizons; sd over seeds uses the population convention\n";
    out += "scheme,setting,mean,sd\n";
    for (const auto& scheme : r.schemes) {
        for (const auto& setting : r.settings) {
            const auto [m, sd] = summary_cell(r, scheme, setting);
            out += scheme + ',' + setting + ',' + fmt_double(m * 1e4) + ',' + fmt_double(sd * 1e4) + '\n';
        }
    }
    return out;
}

std::string format_ratio_csv(const ExperimentResults& r) {
    std::vector<std::pair<std::string, std::vector<double>>> cols;
    const bool has_none = std::find(r.schemes.begin(), r.schemes.end(), "none") != r.schemes.end();
    if (has_none) {
        for (const auto& setting : r.settings) {
            const PeheReport base = summarize_pehe("none", setting, r.horizons, pehe_table(r, "none", setting));
            for (const auto& scheme : r.schemes) {
                if (scheme == "none") continue;
                const PeheReport tgt = summarize_pehe(scheme, setting, r.horizons, pehe_table(r, scheme, setting));
                std::vector<double> ratios;
                for (std::size_t h = 0; h < r.horizons.size(); ++h) {
                    ratios.push_back(base.mean[h] == 0.0 ? kNaN : tgt.mean[h] / base.mean[h]);
                }
                cols.emplace_back(setting + ':' + scheme, std::move(ratios));
            }
        }
    }
    std::string out = "horizon";
    for (const auto& c : cols) out += ',' + c.first;
    out += '\n';
    for (std::size_t h = 0; h < r.horizons.size(); ++h) {
        out += std::to_string(r.horizons[h]);
        for (const auto& c : cols) out += ',' + fmt_double(c.second[h]);
        out += '\n';
    }
    return out;
}

void emit_report(const ExperimentResults& r, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " + ec.message());
    auto write = [&](const std::string& name, const std::string& body) {
        const auto path = (std::filesystem::path(out_dir) / name).string();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path);
        f << body;
        if (!f) throw std::runtime_error("write failed for " + path);
    };
    write("results.csv", format_results_csv(r));
    write("traces.csv", format_traces_csv(r));
    write("summary.md", format_summary_markdown(r));
    write("summary.csv", format_summary_csv(r));
    write("ratios.csv", format_ratio_csv(r));
}

}  // namespace orthosurv
