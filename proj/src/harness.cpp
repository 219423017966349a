#include "fifuse/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <omp.h>

#include "fifuse/random.hpp"
#include "fifuse/stats.hpp"

namespace fifuse {

std::string_view to_string(ScaleProfile p) { return p == ScaleProfile::Paper ? "paper" : "desk"; }

ScaleProfile parse_profile(std::string_view name) {
    if (name == "paper") return ScaleProfile::Paper;
    if (name == "desk") return ScaleProfile::Desk;
    throw std::invalid_argument("unknown profile '" + std::string(name) + "' (expected paper or desk)");
}

ExperimentConfig ExperimentConfig::for_profile(ScaleProfile profile) {
    ExperimentConfig cfg;
    cfg.scale_profile = profile;
    if (profile == ScaleProfile::Paper) {
        cfg.n_samples = 2000;
        cfg.explain_max_rows = 100;
        cfg.shap_permutations = 100;
    } else {
        cfg.noise_levels = {0.0, 4.0};
        cfg.informative_pcts = {20.0, 100.0};
        cfg.n_features_list = {10, 20};
        cfg.runs_per_dataset = 3;
        cfg.n_samples = 500;
        cfg.explain_max_rows = 20;
        cfg.shap_permutations = 32;
        cfg.rf.n_trees = 100;
        cfg.gbt.n_trees = 100;
        cfg.dnn.epochs = 200;
    }
    return cfg;
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("experiment config: " + what); };
    if (noise_levels.empty() || informative_pcts.empty() || n_features_list.empty()) {
        fail("factor lists must be non-empty");
    }
    if (runs_per_dataset == 0) fail("runs_per_dataset must be >= 1");
    if (model_kinds.empty()) fail("at least one model kind is required");
    if (strategies.empty()) fail("at least one strategy is required");
    if (pi_repeats == 0 || shap_permutations == 0 || explain_max_rows == 0 || kmeans_k == 0 || ig_steps == 0) {
        fail("explainer counts must be positive");
    }
    for (double noise : noise_levels) {
        for (double pct : informative_pcts) {
            for (auto m : n_features_list) {
                DataConfig dc{n_samples, m, pct, noise, 0, train_fraction};
                dc.validate();
            }
        }
    }
    for (auto k : model_kinds) fifuse::validate(hyperparams_for(*this, k));
}

std::size_t ExperimentConfig::n_datasets() const {
    return noise_levels.size() * informative_pcts.size() * n_features_list.size();
}

Hyperparams hyperparams_for(const ExperimentConfig& cfg, ModelKind kind) {
    switch (kind) {
        case ModelKind::RandomForest: return cfg.rf;
        case ModelKind::GradientBoostedTrees: return cfg.gbt;
        case ModelKind::LinearSVR: return cfg.svr;
        case ModelKind::DeepNeuralNetwork: return cfg.dnn;
    }
    throw std::invalid_argument("unknown model kind");
}

ExperimentConfig config_from_json(const nlohmann::json& j, std::optional<ScaleProfile> profile) {
    if (!j.is_object()) throw std::invalid_argument("experiment config must be a JSON object");
    ScaleProfile p = ScaleProfile::Desk;
    if (profile) {
        p = *profile;
    } else if (j.contains("scale_profile")) {
        p = parse_profile(j.at("scale_profile").get<std::string>());
    }
    ExperimentConfig cfg = ExperimentConfig::for_profile(p);
    try {
        auto get = [&j](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("noise_levels", cfg.noise_levels);
        get("informative_pcts", cfg.informative_pcts);
        get("n_features_list", cfg.n_features_list);
        get("runs_per_dataset", cfg.runs_per_dataset);
        get("n_samples", cfg.n_samples);
        get("train_fraction", cfg.train_fraction);
        get("seed_base", cfg.seed_base);
        get("pi_repeats", cfg.pi_repeats);
        get("shap_permutations", cfg.shap_permutations);
        get("explain_max_rows", cfg.explain_max_rows);
        get("kmeans_k", cfg.kmeans_k);
        get("ig_steps", cfg.ig_steps);
        get("exact_limit", cfg.exact_limit);
        get("alpha", cfg.fusion.alpha);
        get("bin_width", cfg.fusion.bin_width);
        get("jobs", cfg.jobs);
        if (j.contains("model_kinds")) {
            cfg.model_kinds.clear();
            for (const auto& k : j.at("model_kinds")) cfg.model_kinds.push_back(parse_model_kind(k.get<std::string>()));
        }
        if (j.contains("strategies")) {
            cfg.strategies.clear();
            for (const auto& s : j.at("strategies")) cfg.strategies.push_back(parse_strategy(s.get<std::string>()));
        }
        if (j.contains("aggregate_split")) cfg.aggregate_split = parse_split(j.at("aggregate_split").get<std::string>());
        auto model_override = [&j, &cfg](const char* key, ModelKind kind, auto& field) {
            if (!j.contains(key)) return;
            auto merged = hyperparams_to_json(hyperparams_for(cfg, kind));
            merged.update(j.at(key));
            field = std::get<std::decay_t<decltype(field)>>(hyperparams_from_json(kind, merged));
        };
        model_override("rf", ModelKind::RandomForest, cfg.rf);
        model_override("gbt", ModelKind::GradientBoostedTrees, cfg.gbt);
        model_override("svr", ModelKind::LinearSVR, cfg.svr);
        model_override("dnn", ModelKind::DeepNeuralNetwork, cfg.dnn);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("experiment config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["noise_levels"] = cfg.noise_levels;
    j["informative_pcts"] = cfg.informative_pcts;
    j["n_features_list"] = cfg.n_features_list;
    j["runs_per_dataset"] = cfg.runs_per_dataset;
    j["n_samples"] = cfg.n_samples;
    j["train_fraction"] = cfg.train_fraction;
    j["seed_base"] = cfg.seed_base;
    j["scale_profile"] = to_string(cfg.scale_profile);
    j["pi_repeats"] = cfg.pi_repeats;
    j["shap_permutations"] = cfg.shap_permutations;
    j["explain_max_rows"] = cfg.explain_max_rows;
    j["kmeans_k"] = cfg.kmeans_k;
    j["ig_steps"] = cfg.ig_steps;
    j["exact_limit"] = cfg.exact_limit;
    j["alpha"] = cfg.fusion.alpha;
    j["bin_width"] = cfg.fusion.bin_width;
    j["jobs"] = cfg.jobs;
    j["aggregate_split"] = to_string(cfg.aggregate_split);
    for (auto k : cfg.model_kinds) j["model_kinds"].push_back(to_string(k));
    for (auto s : cfg.strategies) j["strategies"].push_back(to_string(s));
    j["rf"] = hyperparams_to_json(cfg.rf);
    j["gbt"] = hyperparams_to_json(cfg.gbt);
    j["svr"] = hyperparams_to_json(cfg.svr);
    j["dnn"] = hyperparams_to_json(cfg.dnn);
    return j;
}

std::vector<Method> methods_for(ModelKind kind) {
    if (kind == ModelKind::DeepNeuralNetwork) return {Method::PI, Method::SHAP, Method::IG};
    return {Method::PI, Method::SHAP};
}

ImportanceVector explain(const TrainedModel& model, Method method, const SplitView& data, const Matrix& train_X,
                         const ExperimentConfig& cfg, std::uint64_t seed, bool force_exact_shap) {
    const auto& f = model.regressor();
    const std::size_t rows = std::min(cfg.explain_max_rows, data.X.rows());
    ImportanceVector v;
    switch (method) {
        case Method::PI:
            v = permutation_importance(f, data.X, data.y, cfg.pi_repeats, derive_seed(seed, 1));
            break;
        case Method::SHAP: {
            // split rows are already in random order, so the leading rows are a random sample
            const Matrix sample = data.X.slice_rows(0, rows);
            const auto bg = kmeans_summarize(train_X, std::min(cfg.kmeans_k, train_X.rows()), derive_seed(seed, 2));
            if (force_exact_shap || data.X.cols() <= cfg.exact_limit) {
                v = exact_shapley(f, sample, bg, force_exact_shap ? std::max(cfg.exact_limit, data.X.cols())
                                                                  : cfg.exact_limit);
            } else {
                v = sampled_shapley(f, sample, bg, {cfg.shap_permutations, derive_seed(seed, 3), true});
            }
            break;
        }
        case Method::IG: {
            const Matrix sample = data.X.slice_rows(0, rows);
            v = global_ig(f, sample, Baseline::zeros(data.X.cols()), cfg.ig_steps);
            break;
        }
    }
    v.model = std::string(to_string(model.kind()));
    return v;
}

SingleRunResult run_single(const Dataset& d, const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto [train, test] = split(d);
    std::vector<ImportanceVector> train_rows, test_rows;
    for (auto kind : cfg.model_kinds) {
        TrainedModel model = [&] {
            try {
                return fifuse::train(kind, train.X, train.y, hyperparams_for(cfg, kind),
                                     derive_seed(seed, static_cast<int>(kind)));
            } catch (const std::exception& e) {
                throw std::runtime_error("training " + std::string(to_string(kind)) + " failed: " + e.what());
            }
        }();
        for (auto method : methods_for(kind)) {
            const auto explain_seed = derive_seed(seed, static_cast<int>(kind), static_cast<int>(method));
            auto a = explain(model, method, train, train.X, cfg, explain_seed);
            a.split = Split::Train;
            train_rows.push_back(std::move(a));
            auto b = explain(model, method, test, train.X, cfg, explain_seed);
            b.split = Split::Test;
            test_rows.push_back(std::move(b));
        }
    }
    return {build_importance_matrix(train_rows), build_importance_matrix(test_rows)};
}

Scores score(std::span<const double> estimate, std::span<const double> truth) {
    if (estimate.size() != truth.size() || truth.empty()) {
        throw std::invalid_argument("score: vectors must be non-empty and of equal length");
    }
    const double n = static_cast<double>(truth.size());
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = estimate[i] - truth[i];
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    Scores s;
    s.mae = abs_sum / n;
    s.rmse = std::sqrt(sq_sum / n);
    const double mean = stats::mean(truth);
    double tss = 0.0;
    for (double t : truth) tss += (t - mean) * (t - mean);
    if (tss > 0.0) s.r2 = 1.0 - sq_sum / tss;
    return s;
}

std::vector<double> sme_vector(const ImportanceMatrix& V, Method method) {
    std::vector<double> acc(V.n_features(), 0.0);
    std::size_t count = 0;
    for (std::size_t r = 0; r < V.n_sources(); ++r) {
        if (V.labels.at(r).method != method) continue;
        ++count;
        for (std::size_t c = 0; c < V.n_features(); ++c) acc[c] += V.values(r, c);
    }
    if (count == 0) {
        throw std::invalid_argument("sme_vector: no rows for method " + std::string(to_string(method)));
    }
    return l1_normalize(acc);
}

std::vector<RunRecord> score_run(const ImportanceMatrix& V, const GroundTruthImportance& truth,
                                 const ExperimentConfig& cfg, double noise, double informative_pct,
                                 std::size_t n_features, std::size_t run) {
    std::vector<RunRecord> out;
    const Split split = V.labels.empty() ? Split::Train : V.labels.front().split;
    auto record = [&](std::string method, std::span<const double> v) {
        const auto s = score(v, truth.values);
        out.push_back({noise, informative_pct, n_features, run, split, std::move(method), s.mae, s.rmse, s.r2});
    };
    for (auto method : {Method::PI, Method::SHAP, Method::IG}) {
        const bool present = std::any_of(V.labels.begin(), V.labels.end(),
                                         [method](const SourceLabel& l) { return l.method == method; });
        if (present) record(std::string(to_string(method)), sme_vector(V, method));
    }
    for (auto strategy : cfg.strategies) {
        record(std::string(to_string(strategy)), fuse(V, strategy, cfg.fusion).final);
    }
    return out;
}

std::string_view to_string(Factor f) {
    switch (f) {
        case Factor::Noise: return "noise";
        case Factor::Informative: return "informative";
        case Factor::NFeatures: return "nfeat";
    }
    return "?";
}

Factor parse_factor(std::string_view name) {
    for (auto f : kAllFactors) {
        if (to_string(f) == name) return f;
    }
    throw std::invalid_argument("unknown factor '" + std::string(name) + "' (expected noise, informative or nfeat)");
}

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::MAE: return "mae";
        case Metric::RMSE: return "rmse";
        case Metric::R2: return "r2";
    }
    return "?";
}

Metric parse_metric(std::string_view name) {
    for (auto m : kAllMetrics) {
        if (to_string(m) == name) return m;
    }
    throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

std::uint64_t cell_seed(std::uint64_t seed_base, double noise, double informative_pct, std::size_t n_features,
                        std::size_t run) {
    return derive_seed(seed_base, noise, informative_pct, n_features, run);
}

std::vector<Aggregate> aggregate(const std::vector<RunRecord>& records, Split split, std::span<const Factor> factors) {
    std::vector<std::string> methods;
    for (const auto& r : records) {
        if (r.split == split && std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
            methods.push_back(r.method);
        }
    }
    auto level_of = [](const RunRecord& r, Factor f) {
        switch (f) {
            case Factor::Noise: return r.noise;
            case Factor::Informative: return r.informative_pct;
            case Factor::NFeatures: return static_cast<double>(r.n_features);
        }
        return 0.0;
    };
    std::vector<Aggregate> out;
    for (auto factor : factors) {
        std::vector<double> levels;
        for (const auto& r : records) {
            if (r.split == split) levels.push_back(level_of(r, factor));
        }
        std::sort(levels.begin(), levels.end());
        levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        for (auto metric : kAllMetrics) {
            for (const auto& method : methods) {
                for (double level : levels) {
                    std::vector<double> values;
                    for (const auto& r : records) {
                        if (r.split != split || r.method != method || level_of(r, factor) != level) continue;
                        if (metric == Metric::MAE) values.push_back(r.mae);
                        if (metric == Metric::RMSE) values.push_back(r.rmse);
                        if (metric == Metric::R2 && r.r2) values.push_back(*r.r2);
                    }
                    if (values.empty()) continue;
                    out.push_back({factor, level, method, metric, stats::mean(values), stats::sample_std(values),
                                   values.size()});
                }
            }
        }
    }
    return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    struct Task {
        double noise;
        double pct;
        std::size_t m;
        std::size_t run;
    };
    std::vector<Task> tasks;
    for (double noise : cfg.noise_levels) {
        for (double pct : cfg.informative_pcts) {
            for (auto m : cfg.n_features_list) {
                for (std::size_t run = 0; run < cfg.runs_per_dataset; ++run) tasks.push_back({noise, pct, m, run});
            }
        }
    }
    std::vector<std::vector<RunRecord>> slots(tasks.size());
    std::vector<std::optional<std::string>> errors(tasks.size());
    const int threads = cfg.jobs > 0 ? static_cast<int>(cfg.jobs) : omp_get_max_threads();
    const auto n_tasks = static_cast<std::ptrdiff_t>(tasks.size());

#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::ptrdiff_t ti = 0; ti < n_tasks; ++ti) {
        const auto& t = tasks[static_cast<std::size_t>(ti)];
        try {
            const auto seed = cell_seed(cfg.seed_base, t.noise, t.pct, t.m, t.run);
            DataConfig dc{cfg.n_samples, t.m, t.pct, t.noise, seed, cfg.train_fraction};
            const auto d = generate_dataset(dc);
            const auto truth = ground_truth_importance(d);
            const auto result = run_single(d, cfg, derive_seed(seed, 0x6d6f64656cULL));
            auto& slot = slots[static_cast<std::size_t>(ti)];
            slot = score_run(result.train, truth, cfg, t.noise, t.pct, t.m, t.run);
            auto test = score_run(result.test, truth, cfg, t.noise, t.pct, t.m, t.run);
            slot.insert(slot.end(), test.begin(), test.end());
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(ti)] = e.what();
        }
    }

    ExperimentReport report;
    report.profile = cfg.scale_profile;
    report.aggregate_split = cfg.aggregate_split;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (errors[i]) {
            report.failures.push_back({tasks[i].noise, tasks[i].pct, tasks[i].m, tasks[i].run, *errors[i]});
        } else {
            report.records.insert(report.records.end(), slots[i].begin(), slots[i].end());
        }
    }
    // a cell with no successful run is fatal
    for (std::size_t i = 0; i < tasks.size(); i += cfg.runs_per_dataset) {
        bool any = false;
        for (std::size_t r = 0; r < cfg.runs_per_dataset; ++r) any = any || !errors[i + r];
        if (!any) {
            throw std::runtime_error("every run failed for noise=" + std::to_string(tasks[i].noise) +
                                     " informative=" + std::to_string(tasks[i].pct) +
                                     " n_features=" + std::to_string(tasks[i].m) + ": " + *errors[i]);
        }
    }
    report.aggregates = aggregate(report.records, cfg.aggregate_split);
    return report;
}

}  // namespace fifuse
