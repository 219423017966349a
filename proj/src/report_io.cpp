#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "fifuse/csv.hpp"
#include "fifuse/harness.hpp"

namespace fifuse {

namespace {

const std::vector<std::string> kRecordHeader{"noise", "informative_pct", "n_features", "run", "split",
                                             "method", "mae", "rmse", "r2"};

std::size_t parse_count(const std::string& text) {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument("not an integer: '" + text + "'");
    return static_cast<std::size_t>(v);
}

std::string cell_text(double mean, double std) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g±%.4g", mean, std);
    return buf;
}

}  // namespace

void write_records_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
    csv::Table t{kRecordHeader, {}};
    for (const auto& r : records) {
        t.rows.push_back({csv::format_double(r.noise), csv::format_double(r.informative_pct),
                          std::to_string(r.n_features), std::to_string(r.run), std::string(to_string(r.split)),
                          r.method, csv::format_double(r.mae), csv::format_double(r.rmse),
                          r.r2 ? csv::format_double(*r.r2) : std::string()});
    }
    csv::write(path, t);
}

std::vector<RunRecord> read_records_csv(const std::filesystem::path& path) {
    const auto t = csv::read(path);
    if (t.header != kRecordHeader) {
        throw std::runtime_error(path.string() + ": unexpected records header");
    }
    std::vector<RunRecord> out;
    for (const auto& row : t.rows) {
        try {
            RunRecord r;
            r.noise = csv::parse_double(row[0]);
            r.informative_pct = csv::parse_double(row[1]);
            r.n_features = parse_count(row[2]);
            r.run = parse_count(row[3]);
            r.split = parse_split(row[4]);
            r.method = row[5];
            r.mae = csv::parse_double(row[6]);
            r.rmse = csv::parse_double(row[7]);
            if (!row[8].empty()) r.r2 = csv::parse_double(row[8]);
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ": bad record: " + e.what());
        }
    }
    return out;
}

void write_aggregate_table(const std::vector<Aggregate>& aggregates, Factor factor, Metric metric,
                           const std::filesystem::path& path) {
    std::vector<double> levels;
    std::vector<std::string> methods;
    for (const auto& a : aggregates) {
        if (a.factor != factor || a.metric != metric) continue;
        if (std::find(levels.begin(), levels.end(), a.level) == levels.end()) levels.push_back(a.level);
        if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) methods.push_back(a.method);
    }
    std::sort(levels.begin(), levels.end());
    csv::Table t;
    t.header.push_back("method");
    for (double l : levels) t.header.push_back(std::string(to_string(factor)) + "=" + csv::format_double(l));
    for (const auto& m : methods) {
        std::vector<std::string> row{m};
        for (double l : levels) {
            std::string cell;
            for (const auto& a : aggregates) {
                if (a.factor == factor && a.metric == metric && a.method == m && a.level == l) {
                    cell = cell_text(a.mean, a.std);
                }
            }
            row.push_back(cell);
        }
        t.rows.push_back(std::move(row));
    }
    csv::write(path, t);
}

nlohmann::json report_to_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["profile"] = to_string(report.profile);
    j["aggregate_split"] = to_string(report.aggregate_split);
    j["records"] = nlohmann::json::array();
    for (const auto& r : report.records) {
        nlohmann::json e{{"noise", r.noise}, {"informative_pct", r.informative_pct}, {"n_features", r.n_features},
                         {"run", r.run},     {"split", to_string(r.split)},      {"method", r.method},
                         {"mae", r.mae},     {"rmse", r.rmse}};
        e["r2"] = r.r2 ? nlohmann::json(*r.r2) : nlohmann::json(nullptr);
        j["records"].push_back(std::move(e));
    }
    j["aggregates"] = nlohmann::json::array();
    for (const auto& a : report.aggregates) {
        j["aggregates"].push_back({{"factor", to_string(a.factor)}, {"level", a.level},
                                   {"method", a.method},           {"metric", to_string(a.metric)},
                                   {"mean", a.mean},               {"std", a.std},
                                   {"count", a.count}});
    }
    j["failures"] = nlohmann::json::array();
    for (const auto& f : report.failures) {
        j["failures"].push_back({{"noise", f.noise},
                                 {"informative_pct", f.informative_pct},
                                 {"n_features", f.n_features},
                                 {"run", f.run},
                                 {"message", f.message}});
    }
    return j;
}

ExperimentReport report_from_json(const nlohmann::json& j) {
    ExperimentReport report;
    try {
        report.profile = parse_profile(j.at("profile").get<std::string>());
        report.aggregate_split = parse_split(j.at("aggregate_split").get<std::string>());
        for (const auto& e : j.at("records")) {
            RunRecord r;
            r.noise = e.at("noise").get<double>();
            r.informative_pct = e.at("informative_pct").get<double>();
            r.n_features = e.at("n_features").get<std::size_t>();
            r.run = e.at("run").get<std::size_t>();
            r.split = parse_split(e.at("split").get<std::string>());
            r.method = e.at("method").get<std::string>();
            r.mae = e.at("mae").get<double>();
            r.rmse = e.at("rmse").get<double>();
            if (e.contains("r2") && !e.at("r2").is_null()) r.r2 = e.at("r2").get<double>();
            report.records.push_back(std::move(r));
        }
        for (const auto& e : j.at("aggregates")) {
            report.aggregates.push_back({parse_factor(e.at("factor").get<std::string>()), e.at("level").get<double>(),
                                         e.at("method").get<std::string>(),
                                         parse_metric(e.at("metric").get<std::string>()), e.at("mean").get<double>(),
                                         e.at("std").get<double>(), e.at("count").get<std::size_t>()});
        }
        for (const auto& e : j.at("failures")) {
            report.failures.push_back({e.at("noise").get<double>(), e.at("informative_pct").get<double>(),
                                       e.at("n_features").get<std::size_t>(), e.at("run").get<std::size_t>(),
                                       e.at("message").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed report: ") + e.what());
    }
    return report;
}

void export_report_json(const ExperimentReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << report_to_json(report).dump(2) << '\n';
}

ExperimentReport import_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return report_from_json(j);
}

void export_report_csv(const ExperimentReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_records_csv(report.records, dir / "records.csv");
    for (auto factor : kAllFactors) {
        for (auto metric : kAllMetrics) {
            std::string name = "aggregates_" + std::string(to_string(factor));
            if (metric != Metric::MAE) name += "_" + std::string(to_string(metric));
            write_aggregate_table(report.aggregates, factor, metric, dir / (name + ".csv"));
        }
    }
}

void export_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    export_report_csv(report, dir);
    export_report_json(report, dir / "report.json");
}

}  // namespace fifuse
