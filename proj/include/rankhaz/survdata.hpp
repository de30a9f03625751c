#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rankhaz/common.hpp"

namespace rankhaz {

// One subject: observed time, event indicator, covariate row, optional cluster.
struct SubjectRecord {
    double time = 0.0;
    bool event = false;
    std::vector<double> covariates;
    std::optional<int> cluster;
};

struct SurvivalDataset {
    std::vector<SubjectRecord> records;
    int p = 0;  // covariate dimension (including intercept once appended)
    bool has_intercept = false;
    std::vector<std::string> covariate_names;

    int n() const { return static_cast<int>(records.size()); }
    bool has_clusters() const;
    // Number of distinct cluster labels (labels are re-indexed to 0..G-1 on load).
    int n_clusters() const;
    // Dense n x p covariate matrix.
    Eigen::MatrixXd design_matrix() const;
};

// Risk/tie structure shared by every likelihood in this project.
//
// Subjects are sorted by observed time; each risk set R_r = {j : T_j >= t_(r)}
// is a suffix of that order, so risk-set sums reduce to suffix sums and the
// per-subject accumulations zeta_i = sum_{r : t_(r) <= T_i} z_r reduce to
// prefix sums over the distinct event times. Ties between an event time and a
// censoring time put the censored subject inside the risk set.
struct RiskStructure {
    std::vector<double> event_times;   // t_(1) < ... < t_(R)
    std::vector<int> tie_counts;       // d_r = |E_r|
    std::vector<int> event_index;      // E_r flattened, subject ids
    std::vector<int> event_offset;     // size R+1, E_r = event_index[offset[r]..offset[r+1])
    std::vector<int> order;            // subject ids sorted by time ascending
    std::vector<int> risk_start;       // size R: first position in `order` belonging to R_r
    std::vector<int> prefix_count;     // m_i = #{r : t_(r) <= T_i}; 0 when subject is inert
    std::vector<std::uint8_t> event_flag;  // c_i in {0,1}
    int n = 0;
    int n_events = 0;

    int num_event_times() const { return static_cast<int>(event_times.size()); }
    int risk_set_size(int r) const { return n - risk_start[r]; }
    bool is_active(int subject) const { return prefix_count[subject] > 0; }

    // sums[r] = sum_{j in R_r} weights[j], via one backward pass.
    std::vector<double> risk_set_sums(const std::vector<double>& weights) const;
};

// Column bindings for CSV ingestion. Empty covariates means "all remaining
// numeric columns, in file order".
struct CsvSchema {
    std::string time_col = "time";
    std::string event_col = "event";
    std::string cluster_col;  // empty: no cluster column
    std::vector<std::string> covariate_cols;
};

// Reads a header-first comma-delimited file. Missing cells, non-numeric
// values, negative times and event values outside {0,1} are errors reported
// with the (1-based) data row number.
SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema);

// Writes the dataset back out with columns time,event[,cluster],covariates.
void save_csv(const SurvivalDataset& ds, const std::string& path);

// Prepends a constant-1 column. Rejects datasets that already carry one.
SurvivalDataset with_intercept(const SurvivalDataset& ds);

// Requires at least one event.
RiskStructure build_risk_structure(const SurvivalDataset& ds);

// Round each time to the nearest multiple of delta, halves to even.
std::vector<double> coarsen_round(const std::vector<double>& times, double delta);

struct CoarsenedTimes {
    std::vector<double> observed_times;
    std::vector<std::uint8_t> event_flags;
};

// Grid coarsening: event times round up to u*ceil(T/u), censoring times down
// to u*floor(C/u); observed time is the min and the flag records whether the
// rounded event still precedes the rounded censoring.
CoarsenedTimes coarsen_grid(const std::vector<double>& event_times,
                            const std::vector<double>& censor_times, double u);

}  // namespace rankhaz
