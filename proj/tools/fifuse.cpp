// fifuse: generate, explain, fuse, experiment, report.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fifuse/csv.hpp"
#include "fifuse/explainers.hpp"
#include "fifuse/fusion.hpp"
#include "fifuse/harness.hpp"
#include "fifuse/models.hpp"
#include "fifuse/random.hpp"
#include "fifuse/synthdata.hpp"

namespace fs = std::filesystem;
using namespace fifuse;

namespace {

const fs::path kStdout = "/dev/stdout";

const std::vector<std::string> kStrategyNames{"mean",     "median",        "mode",         "box-whiskers",
                                              "tau-test", "majority-vote", "rate-kendall", "rate-spearman"};

void write_text(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << text;
}

bool all_numeric(const std::vector<std::string>& fields) {
    for (const auto& s : fields) {
        try {
            csv::parse_double(s);
        } catch (const std::exception&) {
            return false;
        }
    }
    return true;
}

// Either an importance CSV (model,method,split,f0..) or bare numeric rows,
// with or without a header line.
ImportanceMatrix load_matrix(const fs::path& path) {
    const auto t = csv::read(path);
    if (!t.header.empty() && t.header.front() == "model") {
        return build_importance_matrix(read_importance_csv(path));
    }
    std::vector<std::vector<std::string>> rows;
    if (all_numeric(t.header)) rows.push_back(t.header);
    rows.insert(rows.end(), t.rows.begin(), t.rows.end());
    if (rows.empty()) throw std::runtime_error(path.string() + ": no rows");
    Matrix raw(0, rows.front().size());
    for (const auto& r : rows) {
        std::vector<double> v;
        for (const auto& s : r) v.push_back(csv::parse_double(s));
        raw.append_row(v);
    }
    return build_importance_matrix(raw);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-importance fusion toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;

    auto* gen = app.add_subcommand("generate", "Write a synthetic regression dataset and its sidecar");
    DataConfig dc;
    std::string gen_out;
    gen->add_option("--n-samples", dc.n_samples, "Rows")->check(CLI::PositiveNumber);
    gen->add_option("--n-features", dc.n_features, "Columns")->check(CLI::PositiveNumber);
    gen->add_option("--informative-pct", dc.informative_pct, "Percent of informative features")
        ->check(CLI::Range(0.0, 100.0));
    gen->add_option("--noise-std", dc.noise_std, "Gaussian noise standard deviation")
        ->check(CLI::NonNegativeNumber);
    gen->add_option("--train-fraction", dc.train_fraction, "Share of rows in the train split")
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--seed", seed, "Seed")->envname("FIFUSE_SEED");
    gen->add_option("--out", gen_out, "CSV path; the sidecar gets the .json extension")->required();

    auto* exp_cmd = app.add_subcommand("explain", "Train one model and write its importance vector");
    std::string data_path, model_name, method_name, split_name = "test", explain_out, explain_profile = "desk";
    bool append = false;
    exp_cmd->add_option("--data", data_path, "Dataset CSV written by generate")->required()->check(CLI::ExistingFile);
    exp_cmd->add_option("--model", model_name, "Model kind")
        ->required()
        ->check(CLI::IsMember({"rf", "gbt", "svr", "dnn"}));
    exp_cmd->add_option("--method", method_name, "Attribution method")
        ->required()
        ->check(CLI::IsMember({"pi", "shap", "shap-exact", "ig"}));
    exp_cmd->add_option("--split", split_name, "Split to explain")->check(CLI::IsMember({"train", "test"}));
    exp_cmd->add_option("--profile", explain_profile, "Hyperparameter profile")
        ->check(CLI::IsMember({"paper", "desk"}));
    exp_cmd->add_option("--seed", seed, "Seed")->envname("FIFUSE_SEED");
    exp_cmd->add_option("--out", explain_out, "Importance CSV (stdout when omitted)");
    exp_cmd->add_flag("--append", append, "Append a row to an existing importance CSV");

    auto* fuse_cmd = app.add_subcommand("fuse", "Fuse the rows of an importance matrix");
    std::string matrix_path, strategy_name, fuse_out;
    FusionOptions fopts;
    fuse_cmd->add_option("--matrix", matrix_path, "Matrix CSV, one source per row")
        ->required()
        ->check(CLI::ExistingFile);
    fuse_cmd->add_option("--strategy", strategy_name, "Fusion strategy")
        ->required()
        ->check(CLI::IsMember(kStrategyNames));
    fuse_cmd->add_option("--alpha", fopts.alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
    fuse_cmd->add_option("--bin-width", fopts.bin_width, "Mode histogram bin width")->check(CLI::PositiveNumber);
    fuse_cmd->add_option("--out", fuse_out, "Result JSON (stdout when omitted)");

    auto* run_cmd = app.add_subcommand("experiment", "Run the factorial experiment grid");
    std::string config_path, profile_name = "desk", run_out;
    std::size_t jobs = 0;
    run_cmd->add_option("--config", config_path, "JSON overrides")->check(CLI::ExistingFile);
    run_cmd->add_option("--profile", profile_name, "Scale profile")->check(CLI::IsMember({"paper", "desk"}));
    run_cmd->add_option("--out", run_out, "Output directory")->required();
    run_cmd->add_option("--jobs", jobs, "Worker threads (0 = OpenMP default)");

    auto* rep_cmd = app.add_subcommand("report", "Summarize a records CSV per factor level");
    std::string records_path, factor_name, metric_name = "mae", report_split = "test", report_out;
    rep_cmd->add_option("--records", records_path, "records.csv from experiment")
        ->required()
        ->check(CLI::ExistingFile);
    rep_cmd->add_option("--factor", factor_name, "Grouping factor")
        ->required()
        ->check(CLI::IsMember({"noise", "informative", "nfeat"}));
    rep_cmd->add_option("--metric", metric_name, "Metric")->check(CLI::IsMember({"mae", "rmse", "r2"}));
    rep_cmd->add_option("--split", report_split, "Split")->check(CLI::IsMember({"train", "test"}));
    rep_cmd->add_option("--out", report_out, "Table CSV (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            dc.seed = seed;
            const auto d = generate_dataset(dc);
            write_dataset(d, gen_out);
            std::cerr << "wrote " << gen_out << " and " << sidecar_path(gen_out).string() << '\n';
        } else if (*exp_cmd) {
            const auto d = read_dataset(data_path);
            const auto cfg = ExperimentConfig::for_profile(parse_profile(explain_profile));
            const auto kind = parse_model_kind(model_name);
            const bool exact = method_name == "shap-exact";
            const Method method = exact ? Method::SHAP : parse_method(method_name);
            if (method == Method::IG && kind != ModelKind::DeepNeuralNetwork) {
                std::cerr << "ig requires --model dnn\n";
                return 1;
            }
            const auto [train_view, test_view] = split(d);
            const auto model = train(kind, train_view.X, train_view.y, hyperparams_for(cfg, kind), seed);
            const Split which = parse_split(split_name);
            auto v = explain(model, method, which == Split::Train ? train_view : test_view, train_view.X, cfg,
                             derive_seed(seed, 1), exact);
            v.split = which;
            std::vector<ImportanceVector> rows;
            if (append && !explain_out.empty() && fs::exists(explain_out)) rows = read_importance_csv(explain_out);
            rows.push_back(std::move(v));
            write_importance_csv(explain_out.empty() ? kStdout : fs::path(explain_out), rows);
        } else if (*fuse_cmd) {
            const auto V = load_matrix(matrix_path);
            const auto result = fuse(V, parse_strategy(strategy_name), fopts);
            write_text(fuse_out, result.to_json().dump(2) + "\n");
        } else if (*run_cmd) {
            const auto profile = parse_profile(profile_name);
            ExperimentConfig cfg = ExperimentConfig::for_profile(profile);
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                nlohmann::json j;
                try {
                    in >> j;
                } catch (const nlohmann::json::exception& e) {
                    throw std::runtime_error(config_path + ": " + e.what());
                }
                cfg = config_from_json(j, profile);
            }
            if (jobs > 0) cfg.jobs = jobs;
            std::cerr << "running " << cfg.n_runs() << " runs (" << to_string(cfg.scale_profile) << " profile)\n";
            const auto report = run_experiment(cfg);
            export_report(report, run_out);
            for (const auto& f : report.failures) {
                std::cerr << "run failed: noise=" << f.noise << " informative=" << f.informative_pct
                          << " n_features=" << f.n_features << " run=" << f.run << ": " << f.message << '\n';
            }
            std::cerr << "wrote " << report.records.size() << " records to " << run_out << '\n';
        } else if (*rep_cmd) {
            const auto records = read_records_csv(records_path);
            const Factor factor = parse_factor(factor_name);
            const Factor factors[] = {factor};
            const auto aggs = aggregate(records, parse_split(report_split), factors);
            write_aggregate_table(aggs, factor, parse_metric(metric_name),
                                  report_out.empty() ? kStdout : fs::path(report_out));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
