// Command-line front end: run experiments, generate or validate datasets and
// run the theory probes.
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "orthosurv/evaluation.hpp"
#include "orthosurv/experiment.hpp"
#include "orthosurv/io.hpp"
#include "orthosurv/synthetic.hpp"

using namespace orthosurv;

namespace {

int cmd_run(const std::string& config, const std::string& out, int threads) {
    ExperimentConfig cfg = load_config(config);
    if (!out.empty()) cfg.out_dir = out;
    if (threads > 0) cfg.threads = threads;
    const ExperimentResults res = run_experiment(cfg);
    emit_report(res, cfg.out_dir);
    std::cout << format_summary_markdown(res);
    return 0;
}

int cmd_gen(int scenario, const std::string& setting, std::size_t n, std::uint64_t seed,
            const std::string& out) {
    const auto v = parse_violations(setting);
    if (!v) throw std::runtime_error("unknown setting '" + setting + "'");
    const Simulation sim = generate(ScenarioSpec{scenario, *v, n, seed});
    save_csv_dataset(out, sim.data);
    return 0;
}

int cmd_validate(const std::string& path, int t_max) {
    const Dataset d = load_csv_dataset(path, t_max >= 0 ? std::optional<int>(t_max) : std::nullopt);
    std::printf("ok: %zu rows, p = %zu, t_max = %d\n", d.size(), d.dim(), d.t_max());
    return 0;
}

GroundTruth truth_for(const ExperimentConfig& cfg) {
    return GroundTruth(cfg.scenario, *parse_violations(cfg.settings.front()));
}

Dataset data_for(const ExperimentConfig& cfg) {
    return generate(ScenarioSpec{cfg.scenario, *parse_violations(cfg.settings.front()), cfg.n_train,
                                 cfg.seeds.front()})
        .data;
}

int cmd_probe(const std::string& kind, const std::string& config, int bins, double shift,
              const std::vector<double>& eps) {
    const ExperimentConfig cfg = load_config(config);
    if (!cfg.data_path.empty()) throw std::runtime_error("probes need a synthetic scenario");
    const Dataset d = data_for(cfg);
    const int t = cfg.horizons.front();
    if (kind == "meanzero") {
        auto truth = std::make_shared<const GroundTruth>(truth_for(cfg));
        const ShiftedHazards shifted(truth, shift);
        const NuisanceSource& src = shift == 0.0 ? static_cast<const NuisanceSource&>(*truth) : shifted;
        const MeanZeroReport rep = mean_zero_probe(d, src, t, bins);
        std::printf("bin,a,n,mean_xi_s,z_xi_s,mean_xi_g,z_xi_g\n");
        for (const auto& c : rep.cells) {
            std::printf("%d,%d,%zu,%.6g,%.3f,%.6g,%.3f\n", c.bin, c.a, c.n, c.mean_s, c.z_s, c.mean_g,
                        c.z_g);
        }
        std::printf("# max |z| xi_s = %.3f, xi_g = %.3f, empty cells = %zu\n", rep.max_abs_z_s,
                    rep.max_abs_z_g, rep.empty_cells);
        return 0;
    }
    const GroundTruth truth = truth_for(cfg);
    std::printf("loss,scheme,direction_seed,slope\n");
    for (auto seed : cfg.seeds) {
        for (auto scheme : cfg.schemes) {
            OrthoProbeOptions o;
            o.scheme = scheme;
            const auto r = orthogonality_probe(d, truth, t, seed, eps, o);
            std::printf("orthogonal,%s,%llu,%.4f\n", std::string(scheme_name(scheme)).c_str(),
                        static_cast<unsigned long long>(seed), r.slope);
        }
        OrthoProbeOptions o;
        o.loss = ProbeLoss::plugin;
        const auto r = orthogonality_probe(d, truth, t, seed, eps, o);
        std::printf("plugin,-,%llu,%.4f\n", static_cast<unsigned long long>(seed), r.slope);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Orthogonal survival learners with overlap weighting"};
    app.require_subcommand(1);

    std::string config, out;
    int threads = 0;
    auto* run = app.add_subcommand("run", "Run an experiment from a config file");
    run->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "Output directory (overrides config)");
    run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    int scenario = 1;
    std::string setting = "full", gen_out;
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset as CSV");
    gen->add_option("--scenario", scenario, "Scenario")->check(CLI::IsMember({1, 2}));
    gen->add_option("--setting", setting, "full, low_treatment, low_censoring, low_survival (joined by +)");
    gen->add_option("--n", n, "Rows")->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "Seed");
    gen->add_option("--out", gen_out, "Output CSV")->required();

    std::string data;
    int t_max = -1;
    auto* val = app.add_subcommand("validate", "Validate a dataset CSV");
    val->add_option("--data", data, "Dataset CSV")->required()->check(CLI::ExistingFile);
    val->add_option("--t-max", t_max, "Grid end (default: largest observed time)");

    std::string kind;
    int bins = 10;
    double shift = 0.0;
    std::vector<double> eps{0.02, 0.04, 0.08, 0.16};
    auto* probe = app.add_subcommand("probe", "Mean-zero or orthogonality probe");
    probe->add_option("--kind", kind, "meanzero or ortho")->required()->check(CLI::IsMember({"meanzero", "ortho"}));
    probe->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
    probe->add_option("--bins", bins, "Covariate bins for meanzero");
    probe->add_option("--shift", shift, "Additive hazard corruption for meanzero");
    probe->add_option("--eps", eps, "Perturbation sizes for ortho")->delimiter(',');

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config, out, threads);
        if (*gen) return cmd_gen(scenario, setting, n, seed, gen_out);
        if (*val) return cmd_validate(data, t_max);
        if (*probe) return cmd_probe(kind, config, bins, shift, eps);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
