#include "rankhaz/survdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace rankhaz {

bool SurvivalDataset::has_clusters() const {
    if (records.empty()) return false;
    return std::all_of(records.begin(), records.end(),
                       [](const SubjectRecord& r) { return r.cluster.has_value(); });
}

int SurvivalDataset::n_clusters() const {
    int g = -1;
    for (const auto& r : records)
        if (r.cluster) g = std::max(g, *r.cluster);
    return g + 1;
}

Eigen::MatrixXd SurvivalDataset::design_matrix() const {
    Eigen::MatrixXd X(n(), p);
    for (int i = 0; i < n(); ++i)
        for (int j = 0; j < p; ++j) X(i, j) = records[i].covariates[j];
    return X;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, const std::string& col, int row) {
    const std::string t = trim(cell);
    if (t.empty())
        throw ValidationError("missing value in column '" + col + "' at data row " +
                              std::to_string(row));
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || *end != '\0' || !std::isfinite(v))
        throw ValidationError("non-numeric value '" + t + "' in column '" + col +
                              "' at data row " + std::to_string(row));
    return v;
}

}  // namespace

SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("file '" + path + "' is empty");
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    auto find_col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ValidationError("missing column '" + name + "' in '" + path + "'");
        return static_cast<int>(it - header.begin());
    };

    const int time_idx = find_col(schema.time_col);
    const int event_idx = find_col(schema.event_col);
    int cluster_idx = -1;
    if (!schema.cluster_col.empty()) cluster_idx = find_col(schema.cluster_col);

    std::vector<int> cov_idx;
    std::vector<std::string> cov_names;
    if (schema.covariate_cols.empty()) {
        for (int j = 0; j < static_cast<int>(header.size()); ++j) {
            if (j == time_idx || j == event_idx || j == cluster_idx) continue;
            cov_idx.push_back(j);
            cov_names.push_back(header[j]);
        }
    } else {
        for (const auto& name : schema.covariate_cols) {
            cov_idx.push_back(find_col(name));
            cov_names.push_back(name);
        }
    }

    SurvivalDataset ds;
    ds.p = static_cast<int>(cov_idx.size());
    ds.covariate_names = cov_names;

    std::map<std::string, int> cluster_ids;  // label -> 0-based index, first appearance
    int row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        std::vector<std::string> cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) < static_cast<int>(header.size()))
            throw ValidationError("data row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header.size()));
        SubjectRecord rec;
        rec.time = parse_number(cells[time_idx], schema.time_col, row);
        if (rec.time < 0.0)
            throw ValidationError("negative time " + std::to_string(rec.time) +
                                  " at data row " + std::to_string(row));
        const double ev = parse_number(cells[event_idx], schema.event_col, row);
        if (ev != 0.0 && ev != 1.0)
            throw ValidationError("event value '" + trim(cells[event_idx]) +
                                  "' outside {0,1} at data row " + std::to_string(row));
        rec.event = (ev == 1.0);
        if (cluster_idx >= 0) {
            const std::string label = trim(cells[cluster_idx]);
            if (label.empty())
                throw ValidationError("missing value in column '" + schema.cluster_col +
                                      "' at data row " + std::to_string(row));
            auto [it, inserted] =
                cluster_ids.emplace(label, static_cast<int>(cluster_ids.size()));
            rec.cluster = it->second;
        }
        rec.covariates.reserve(cov_idx.size());
        for (size_t k = 0; k < cov_idx.size(); ++k)
            rec.covariates.push_back(parse_number(cells[cov_idx[k]], cov_names[k], row));
        ds.records.push_back(std::move(rec));
    }
    if (ds.records.empty()) throw ValidationError("file '" + path + "' has no data rows");
    return ds;
}

void save_csv(const SurvivalDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file '" + path + "'");
    out.precision(std::numeric_limits<double>::max_digits10);
    const bool clustered = ds.has_clusters();
    out << "time,event";
    if (clustered) out << ",cluster";
    for (int j = 0; j < ds.p; ++j) {
        out << ',';
        if (j < static_cast<int>(ds.covariate_names.size()) && !ds.covariate_names[j].empty())
            out << ds.covariate_names[j];
        else
            out << "x" << (j + 1);
    }
    out << '\n';
    for (const auto& r : ds.records) {
        out << r.time << ',' << (r.event ? 1 : 0);
        if (clustered) out << ',' << *r.cluster;
        for (double v : r.covariates) out << ',' << v;
        out << '\n';
    }
}

SurvivalDataset with_intercept(const SurvivalDataset& ds) {
    if (ds.has_intercept)
        throw ValidationError("dataset already has an intercept column");
    SurvivalDataset out = ds;
    out.has_intercept = true;
    out.p = ds.p + 1;
    out.covariate_names.insert(out.covariate_names.begin(), "(Intercept)");
    for (auto& r : out.records) r.covariates.insert(r.covariates.begin(), 1.0);
    return out;
}

RiskStructure build_risk_structure(const SurvivalDataset& ds) {
    const int n = ds.n();
    RiskStructure rs;
    rs.n = n;
    rs.order.resize(n);
    std::iota(rs.order.begin(), rs.order.end(), 0);
    std::stable_sort(rs.order.begin(), rs.order.end(), [&](int a, int b) {
        return ds.records[a].time < ds.records[b].time;
    });

    for (int i = 0; i < n; ++i)
        if (ds.records[i].event) ++rs.n_events;
    if (rs.n_events == 0)
        throw ValidationError("dataset has zero events; risk structure undefined");

    // Distinct event times in increasing order, with their tie blocks.
    std::vector<std::pair<double, int>> events;  // (time, subject)
    for (int k = 0; k < n; ++k) {
        const int i = rs.order[k];
        if (ds.records[i].event) events.emplace_back(ds.records[i].time, i);
    }
    rs.event_offset.push_back(0);
    for (size_t k = 0; k < events.size(); ++k) {
        if (k == 0 || events[k].first != events[k - 1].first) {
            rs.event_times.push_back(events[k].first);
            if (k > 0) rs.event_offset.push_back(static_cast<int>(k));
        }
        rs.event_index.push_back(events[k].second);
    }
    rs.event_offset.push_back(static_cast<int>(events.size()));
    const int R = rs.num_event_times();
    rs.tie_counts.resize(R);
    for (int r = 0; r < R; ++r)
        rs.tie_counts[r] = rs.event_offset[r + 1] - rs.event_offset[r];

    // risk_start[r]: first sorted position with T >= t_(r).
    rs.risk_start.resize(R);
    {
        int k = 0;
        for (int r = 0; r < R; ++r) {
            while (k < n && ds.records[rs.order[k]].time < rs.event_times[r]) ++k;
            rs.risk_start[r] = k;
        }
    }

    rs.prefix_count.resize(n);
    rs.event_flag.resize(n);
    for (int i = 0; i < n; ++i) {
        const double t = ds.records[i].time;
        rs.prefix_count[i] = static_cast<int>(
            std::upper_bound(rs.event_times.begin(), rs.event_times.end(), t) -
            rs.event_times.begin());
        rs.event_flag[i] = ds.records[i].event ? 1 : 0;
    }
    return rs;
}

std::vector<double> RiskStructure::risk_set_sums(const std::vector<double>& weights) const {
    const int R = num_event_times();
    std::vector<double> sums(R);
    double acc = 0.0;
    int k = n - 1;
    for (int r = R - 1; r >= 0; --r) {
        while (k >= risk_start[r]) acc += weights[order[k--]];
        sums[r] = acc;
    }
    return sums;
}

std::vector<double> coarsen_round(const std::vector<double>& times, double delta) {
    if (!(delta > 0.0)) throw ValidationError("coarsen_round requires delta > 0");
    std::vector<double> out(times.size());
    for (size_t i = 0; i < times.size(); ++i)
        out[i] = delta * std::nearbyint(times[i] / delta);  // half-to-even
    return out;
}

CoarsenedTimes coarsen_grid(const std::vector<double>& event_times,
                            const std::vector<double>& censor_times, double u) {
    if (!(u >= 1.0)) throw ValidationError("coarsen_grid requires u >= 1");
    if (event_times.size() != censor_times.size())
        throw ValidationError("coarsen_grid: event and censor vectors differ in length");
    CoarsenedTimes out;
    out.observed_times.resize(event_times.size());
    out.event_flags.resize(event_times.size());
    for (size_t i = 0; i < event_times.size(); ++i) {
        const double te = u * std::ceil(event_times[i] / u);
        const double tc = u * std::floor(censor_times[i] / u);
        out.observed_times[i] = std::min(te, tc);
        out.event_flags[i] = (te <= tc) ? 1 : 0;
    }
    return out;
}

}  // namespace rankhaz
