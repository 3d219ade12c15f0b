#pragma once

#include "taskexposure/clustering.hpp"
#include "taskexposure/exposure.hpp"

#include <array>
#include <string>
#include <vector>

namespace taskexposure {

/// band, n_tasks, share_pct.
std::string band_distribution_table(const std::vector<Band>& bands);

/// Role-level E_j histogram on [0,1] in `bins` bins: bin_lo, bin_hi, n_roles, weighted_share_pct.
std::string exposure_histogram_table(const std::vector<double>& E, const std::vector<double>& weights,
                                     std::size_t bins = 10);

struct ClusterSummaryRow {
    ExposureCluster cluster = ExposureCluster::Low;
    std::size_t n = 0;
    double mean_exposure = 0.0;
    double mean_std = 0.0;
    double max_exposure = 0.0;
    double min_exposure = 0.0;
};

/// Per cluster over member roles; empty clusters are left out.
std::vector<ClusterSummaryRow> cluster_summary(const std::vector<ExposureCluster>& labels,
                                               const std::vector<double>& E, const std::vector<double>& sigma);
/// cluster, n, mean_exposure, mean_std, max_exposure, min_exposure.
std::string cluster_summary_table(const std::vector<ClusterSummaryRow>& rows);

/// theme, n_reasonings, share_pct.
std::string theme_table(const std::array<double, 6>& shares, std::size_t n);

struct DecileFocus {
    int decile = 1;
    std::string category;
    double weight = 1.0;
};

/// decile, category, n_roles, weighted_share_pct (within decile).
std::string focus_decile_table(const std::vector<DecileFocus>& rows);

/// Splits tab-separated text into rows of cells (header included).
std::vector<std::vector<std::string>> parse_tsv(const std::string& text);

} // namespace taskexposure
