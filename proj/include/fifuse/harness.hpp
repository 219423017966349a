#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fifuse/explainers.hpp"
#include "fifuse/fusion.hpp"
#include "fifuse/models.hpp"
#include "fifuse/synthdata.hpp"

namespace fifuse {

enum class ScaleProfile { Paper, Desk };
std::string_view to_string(ScaleProfile p);
ScaleProfile parse_profile(std::string_view name);

struct ExperimentConfig {
    std::vector<double> noise_levels{0.0, 2.0, 4.0};
    std::vector<double> informative_pcts{20.0, 40.0, 60.0, 80.0, 100.0};
    std::vector<std::size_t> n_features_list{20, 60, 100};
    std::size_t runs_per_dataset = 10;
    std::size_t n_samples = 500;
    double train_fraction = 0.8;
    std::vector<ModelKind> model_kinds{std::begin(kAllModelKinds), std::end(kAllModelKinds)};
    std::vector<FusionStrategy> strategies{std::begin(kAllStrategies), std::end(kAllStrategies)};
    std::uint64_t seed_base = 0;
    ScaleProfile scale_profile = ScaleProfile::Desk;

    std::size_t pi_repeats = 5;
    std::size_t shap_permutations = 64;
    std::size_t explain_max_rows = 40;  // rows per split explained by SHAP and IG
    std::size_t kmeans_k = 25;
    std::size_t ig_steps = 100;
    std::size_t exact_limit = kDefaultExactLimit;
    FusionOptions fusion;

    ForestParams rf;
    BoostingParams gbt;
    SvrParams svr;
    MlpParams dnn;

    /// Split whose records feed the aggregate tables.
    Split aggregate_split = Split::Test;
    /// Worker threads for grid cells; 0 uses the OpenMP default.
    std::size_t jobs = 0;

    /// Paper: the full 45-dataset grid, published model sizes, 2000 samples.
    /// Desk: a 2x2x2 grid with 3 runs, 100-tree ensembles and smaller
    /// explainer budgets.
    static ExperimentConfig for_profile(ScaleProfile profile);

    void validate() const;
    std::size_t n_datasets() const;
    std::size_t n_runs() const { return n_datasets() * runs_per_dataset; }
};

/// Profile defaults from `profile` (or the document's scale_profile, or
/// desk), then every field present in the document.
ExperimentConfig config_from_json(const nlohmann::json& j, std::optional<ScaleProfile> profile = std::nullopt);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

Hyperparams hyperparams_for(const ExperimentConfig& cfg, ModelKind kind);

/// Attribution methods applied to each model kind: PI and SHAP everywhere,
/// IG additionally for the network.
std::vector<Method> methods_for(ModelKind kind);

struct SingleRunResult {
    ImportanceMatrix train;
    ImportanceMatrix test;
};

/// Trains every configured model on the train split and explains both splits.
SingleRunResult run_single(const Dataset& d, const ExperimentConfig& cfg, std::uint64_t seed);

/// Computes one (model, method) attribution on one split. The background
/// for SHAP is summarized from `train_X`.
ImportanceVector explain(const TrainedModel& model, Method method, const SplitView& data, const Matrix& train_X,
                         const ExperimentConfig& cfg, std::uint64_t seed, bool force_exact_shap = false);

struct Scores {
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> r2;  // missing when the truth vector is constant
};

Scores score(std::span<const double> estimate, std::span<const double> truth);

/// Mean of the rows produced by `method`, renormalized.
std::vector<double> sme_vector(const ImportanceMatrix& V, Method method);

struct RunRecord {
    double noise = 0.0;
    double informative_pct = 0.0;
    std::size_t n_features = 0;
    std::size_t run = 0;
    Split split = Split::Train;
    std::string method;
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> r2;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Records for one run and split: one per SME method present, one per strategy.
std::vector<RunRecord> score_run(const ImportanceMatrix& V, const GroundTruthImportance& truth,
                                 const ExperimentConfig& cfg, double noise, double informative_pct,
                                 std::size_t n_features, std::size_t run);

enum class Factor { Noise, Informative, NFeatures };
inline constexpr Factor kAllFactors[] = {Factor::Noise, Factor::Informative, Factor::NFeatures};
std::string_view to_string(Factor f);  // noise, informative, nfeat
Factor parse_factor(std::string_view name);

enum class Metric { MAE, RMSE, R2 };
inline constexpr Metric kAllMetrics[] = {Metric::MAE, Metric::RMSE, Metric::R2};
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);

struct Aggregate {
    Factor factor = Factor::Noise;
    double level = 0.0;
    std::string method;
    Metric metric = Metric::MAE;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation
    std::size_t count = 0;

    friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

struct RunFailure {
    double noise = 0.0;
    double informative_pct = 0.0;
    std::size_t n_features = 0;
    std::size_t run = 0;
    std::string message;

    friend bool operator==(const RunFailure&, const RunFailure&) = default;
};

struct ExperimentReport {
    ScaleProfile profile = ScaleProfile::Desk;
    Split aggregate_split = Split::Test;
    std::vector<RunRecord> records;
    std::vector<Aggregate> aggregates;
    std::vector<RunFailure> failures;

    friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

/// Seed of one grid cell and run, independent of execution order.
std::uint64_t cell_seed(std::uint64_t seed_base, double noise, double informative_pct, std::size_t n_features,
                        std::size_t run);

/// Mean and sample std per (factor level, method, metric) over the records of `split`.
/// Methods keep their first-appearance order.
std::vector<Aggregate> aggregate(const std::vector<RunRecord>& records, Split split,
                                 std::span<const Factor> factors = kAllFactors);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// records.csv, aggregates_<factor>[_<metric>].csv and report.json under `dir`.
void export_report(const ExperimentReport& report, const std::filesystem::path& dir);
void export_report_csv(const ExperimentReport& report, const std::filesystem::path& dir);
void export_report_json(const ExperimentReport& report, const std::filesystem::path& path);
ExperimentReport import_report_json(const std::filesystem::path& path);

void write_records_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path);
std::vector<RunRecord> read_records_csv(const std::filesystem::path& path);

/// Table shaped like the published summaries: one row per method, one column
/// per level, cells "mean±std".
void write_aggregate_table(const std::vector<Aggregate>& aggregates, Factor factor, Metric metric,
                           const std::filesystem::path& path);

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

}  // namespace fifuse
