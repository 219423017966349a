#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "fifuse/harness.hpp"
#include "support.hpp"

using namespace fifuse;

namespace {

ExperimentConfig tiny_config() {
    auto cfg = ExperimentConfig::for_profile(ScaleProfile::Desk);
    cfg.noise_levels = {0.0, 1.0};
    cfg.informative_pcts = {50.0, 100.0};
    cfg.n_features_list = {4};
    cfg.runs_per_dataset = 2;
    cfg.n_samples = 60;
    cfg.rf.n_trees = 5;
    cfg.gbt.n_trees = 5;
    cfg.dnn.epochs = 3;
    cfg.svr.iterations = 50;
    cfg.explain_max_rows = 4;
    cfg.kmeans_k = 4;
    cfg.ig_steps = 10;
    cfg.pi_repeats = 2;
    return cfg;
}

std::size_t count_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

ImportanceMatrix labeled(const std::vector<std::pair<Method, std::vector<double>>>& rows) {
    std::vector<ImportanceVector> vs;
    for (const auto& [m, v] : rows) vs.push_back({v, "x", m, Split::Test, false});
    return build_importance_matrix(vs);
}

}  // namespace

TEST_CASE("score examples") {
    const std::vector<double> t{0.2, 0.3, 0.5};
    const auto self = score(t, t);
    CHECK(self.mae == 0.0);
    CHECK(self.rmse == 0.0);
    CHECK(*self.r2 == 1.0);

    const auto s = score(std::vector<double>{0.1, 0.2}, std::vector<double>{0.2, 0.2});
    CHECK(s.mae == doctest::Approx(0.05));
    CHECK(s.rmse == doctest::Approx(std::sqrt(0.005)));
    CHECK_FALSE(s.r2.has_value());

    const auto flat = score(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}, t);
    CHECK(*flat.r2 == doctest::Approx(0.0).scale(1.0));
    CHECK_THROWS_AS(score(std::vector<double>{1.0}, t), std::invalid_argument);
}

TEST_CASE("rmse bounds mae from above") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t m = 2 + trial % 30;
        const auto a = testing::random_simplex(m, rng, 0.3);
        const auto b = testing::random_simplex(m, rng, 0.3);
        const auto s = score(a, b);
        CHECK(s.rmse >= s.mae - 1e-15);
    }
}

TEST_CASE("single-method vectors") {
    const auto V = labeled({{Method::PI, {1, 1, 2}},
                            {Method::SHAP, {1, 0, 0}},
                            {Method::PI, {1, 1, 2}},
                            {Method::SHAP, {0, 1, 1}},
                            {Method::IG, {3, 1, 0}}});
    CHECK(sme_vector(V, Method::PI) == std::vector<double>{0.25, 0.25, 0.5});
    CHECK(sme_vector(V, Method::IG) == std::vector<double>{0.75, 0.25, 0.0});
    const auto shap = sme_vector(V, Method::SHAP);
    CHECK(shap[0] == doctest::Approx(0.5));
    CHECK(shap[1] == doctest::Approx(0.25));
    CHECK(shap[2] == doctest::Approx(0.25));
    CHECK_THROWS_AS(sme_vector(labeled({{Method::PI, {1, 2}}}), Method::IG), std::invalid_argument);
}

TEST_CASE("profiles and grid arithmetic") {
    const auto paper = ExperimentConfig::for_profile(ScaleProfile::Paper);
    CHECK(paper.n_datasets() == 45);
    CHECK(paper.n_runs() == 450);
    CHECK(std::get<ForestParams>(hyperparams_for(paper, ModelKind::RandomForest)).n_trees == 700);
    CHECK(std::get<SvrParams>(hyperparams_for(paper, ModelKind::LinearSVR)).C == 2048.0);
    const auto desk = ExperimentConfig::for_profile(ScaleProfile::Desk);
    CHECK(desk.n_datasets() == 8);
    CHECK(desk.n_runs() == 24);
    CHECK(desk.n_samples == 500);
    CHECK(desk.rf.n_trees == 100);
    paper.validate();
    desk.validate();
    CHECK(parse_profile(to_string(ScaleProfile::Paper)) == ScaleProfile::Paper);
    CHECK_THROWS_AS(parse_profile("huge"), std::invalid_argument);
}

TEST_CASE("methods follow the model pairing") {
    CHECK(methods_for(ModelKind::RandomForest) == std::vector<Method>{Method::PI, Method::SHAP});
    CHECK(methods_for(ModelKind::DeepNeuralNetwork) == std::vector<Method>{Method::PI, Method::SHAP, Method::IG});
    std::size_t total = 0;
    for (auto k : kAllModelKinds) total += methods_for(k).size();
    CHECK(total == 9);
}

TEST_CASE("invalid configurations are rejected") {
    auto cfg = tiny_config();
    cfg.noise_levels.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.runs_per_dataset = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.informative_pcts = {5.0};  // rounds to zero informative features out of four
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.dnn.dropout = 1.0;
    CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("config json round trip and overrides") {
    const auto cfg = tiny_config();
    const auto back = config_from_json(config_to_json(cfg));
    CHECK(config_to_json(back) == config_to_json(cfg));

    const auto j = nlohmann::json::parse(R"({"runs_per_dataset": 7, "n_features_list": [5, 6],
                                              "rf": {"n_trees": 3}, "strategies": ["mean", "rate-kendall"]})");
    const auto over = config_from_json(j, ScaleProfile::Paper);
    CHECK(over.runs_per_dataset == 7);
    CHECK(over.n_features_list == std::vector<std::size_t>{5, 6});
    CHECK(over.rf.n_trees == 3);
    CHECK(over.rf.max_depth == 7);
    CHECK(over.n_samples == 2000);
    CHECK(over.strategies == std::vector<FusionStrategy>{FusionStrategy::Mean, FusionStrategy::RateKendall});
    CHECK(config_from_json(nlohmann::json::object()).scale_profile == ScaleProfile::Desk);
    CHECK_THROWS(config_from_json(nlohmann::json::array()));
    CHECK_THROWS(config_from_json(nlohmann::json::parse(R"({"strategies": ["nope"]})")));
}

TEST_CASE("a run yields nine sources per split, six without the network") {
    const auto cfg = tiny_config();
    const auto d = generate_dataset({60, 4, 50.0, 0.0, 5});
    const auto r = run_single(d, cfg, 11);
    CHECK(r.train.n_sources() == 9);
    CHECK(r.test.n_sources() == 9);
    CHECK(std::all_of(r.test.labels.begin(), r.test.labels.end(), [](const auto& l) { return l.split == Split::Test; }));
    CHECK(std::count_if(r.test.labels.begin(), r.test.labels.end(), [](const auto& l) { return l.method == Method::IG; }) == 1);

    const auto again = run_single(d, cfg, 11);
    CHECK(again.train.values == r.train.values);
    CHECK(again.test.values == r.test.values);

    auto no_net = cfg;
    no_net.model_kinds = {ModelKind::RandomForest, ModelKind::GradientBoostedTrees, ModelKind::LinearSVR};
    const auto six = run_single(d, no_net, 11);
    CHECK(six.test.n_sources() == 6);
    CHECK(std::none_of(six.test.labels.begin(), six.test.labels.end(), [](const auto& l) { return l.method == Method::IG; }));
}

TEST_CASE("the fused mean never trails the worst source within a run") {
    const auto cfg = tiny_config();
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto d = generate_dataset({60, 4, 100.0, 1.0, seed});
        const auto truth = ground_truth_importance(d);
        const auto r = run_single(d, cfg, seed);
        for (const auto* V : {&r.train, &r.test}) {
            double worst = 0.0;
            for (std::size_t i = 0; i < V->n_sources(); ++i) worst = std::max(worst, score(V->values.row(i), truth.values).mae);
            CHECK(score(fuse_mean(*V).final, truth.values).mae <= worst + 1e-12);
        }
    }
}

TEST_CASE("cell seeds are distinct across the paper grid") {
    const auto cfg = ExperimentConfig::for_profile(ScaleProfile::Paper);
    std::set<std::uint64_t> seeds;
    for (double n : cfg.noise_levels) {
        for (double p : cfg.informative_pcts) {
            for (auto m : cfg.n_features_list) {
                for (std::size_t r = 0; r < cfg.runs_per_dataset; ++r) seeds.insert(cell_seed(0, n, p, m, r));
            }
        }
    }
    CHECK(seeds.size() == 450);
    CHECK(cell_seed(1, 0, 20, 20, 0) != cell_seed(0, 0, 20, 20, 0));
}

TEST_CASE("experiment records, aggregates and determinism") {
    const auto cfg = tiny_config();
    const auto report = run_experiment(cfg);
    CHECK(report.failures.empty());
    CHECK(report.records.size() == cfg.n_runs() * 2 * 11);
    std::size_t test_records = 0;
    for (const auto& r : report.records) {
        CHECK(r.rmse >= r.mae - 1e-15);
        test_records += r.split == Split::Test ? 1 : 0;
    }
    CHECK(test_records == cfg.n_runs() * 11);

    // per factor: levels x methods x metrics (r2 always present here)
    const std::size_t expected = (2 + 2 + 1) * 11 * 3;
    CHECK(report.aggregates.size() == expected);
    for (const auto& a : report.aggregates) {
        const std::size_t levels = a.factor == Factor::Noise ? 2 : a.factor == Factor::Informative ? 2 : 1;
        CHECK(a.count == cfg.n_runs() / levels);
        if (a.factor != Factor::Noise || a.metric != Metric::MAE) continue;
        std::vector<double> v;
        for (const auto& r : report.records) {
            if (r.split == Split::Test && r.method == a.method && r.noise == a.level) v.push_back(r.mae);
        }
        double mu = 0.0;
        for (double x : v) mu += x / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mu) * (x - mu);
        CHECK(a.mean == doctest::Approx(mu).epsilon(1e-12));
        CHECK(a.std == doctest::Approx(std::sqrt(ss / static_cast<double>(v.size() - 1))).epsilon(1e-12));
    }
    CHECK(run_experiment(cfg) == report);
}

TEST_CASE("aggregates skip missing r2 values") {
    std::vector<RunRecord> records{{0, 50, 4, 0, Split::Test, "mean", 0.1, 0.2, std::nullopt},
                                   {0, 50, 4, 1, Split::Test, "mean", 0.3, 0.4, 0.5},
                                   {0, 50, 4, 0, Split::Train, "mean", 9.0, 9.0, 9.0}};
    const auto aggs = aggregate(records, Split::Test);
    for (const auto& a : aggs) {
        if (a.metric == Metric::R2) {
            CHECK(a.count == 1);
            CHECK(a.mean == 0.5);
        } else {
            CHECK(a.count == 2);
        }
        if (a.metric == Metric::MAE) CHECK(a.mean == doctest::Approx(0.2));
    }
    CHECK(aggs.size() == 3 * 3);
}

TEST_CASE("report files round trip") {
    testing::TempDir dir("harness");
    auto cfg = tiny_config();
    cfg.informative_pcts = {100.0};
    cfg.runs_per_dataset = 1;
    const auto report = run_experiment(cfg);
    export_report(report, dir.path());
    CHECK(import_report_json(dir / "report.json") == report);
    CHECK(read_records_csv(dir / "records.csv") == report.records);

    // one header plus one row per method
    CHECK(count_lines(dir / "aggregates_noise.csv") == 12);
    std::ifstream in(dir / "aggregates_noise.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "method,noise=0,noise=1");
    CHECK(first.rfind("pi,", 0) == 0);
    CHECK(first.find("±") != std::string::npos);
    for (const char* name : {"aggregates_informative.csv", "aggregates_nfeat.csv", "aggregates_noise_rmse.csv",
                             "aggregates_noise_r2.csv"}) {
        CHECK(std::filesystem::exists(dir / name));
    }
}

TEST_CASE("an empty report exports headers only") {
    testing::TempDir dir("harness-empty");
    const ExperimentReport empty;
    export_report(empty, dir.path());
    CHECK(count_lines(dir / "records.csv") == 1);
    CHECK(count_lines(dir / "aggregates_noise.csv") == 1);
    CHECK(import_report_json(dir / "report.json") == empty);
    CHECK(read_records_csv(dir / "records.csv").empty());
}

TEST_CASE("writing to an unwritable location names the path") {
    const ExperimentReport empty;
    try {
        export_report_json(empty, "/nonexistent-dir/report.json");
        FAIL("expected an exception");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("/nonexistent-dir") != std::string::npos);
    }
}
