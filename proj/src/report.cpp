#include "taskexposure/report.hpp"

#include "taskexposure/common.hpp"
#include "taskexposure/prompts.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

namespace taskexposure {

std::string band_distribution_table(const std::vector<Band>& bands) {
    std::array<std::size_t, 4> counts{};
    for (Band b : bands) ++counts[static_cast<std::size_t>(b)];
    std::ostringstream out;
    out << "band\tn_tasks\tshare_pct\n";
    for (std::size_t i = 0; i < 4; ++i) {
        const double share = bands.empty() ? 0.0 : 100.0 * static_cast<double>(counts[i]) / bands.size();
        out << band_name(static_cast<Band>(i)) << '\t' << counts[i] << '\t' << std::fixed << std::setprecision(2)
            << share << '\n';
    }
    return out.str();
}

std::string exposure_histogram_table(const std::vector<double>& E, const std::vector<double>& weights,
                                     std::size_t bins) {
    if (E.size() != weights.size()) throw PreconditionError("histogram: weight count mismatch");
    if (bins == 0) throw PreconditionError("histogram: zero bins");
    std::vector<std::size_t> n(bins, 0);
    std::vector<CompensatedSum> w(bins);
    CompensatedSum total;
    for (std::size_t i = 0; i < E.size(); ++i) {
        auto b = static_cast<std::size_t>(std::clamp(E[i], 0.0, 1.0) * static_cast<double>(bins));
        b = std::min(b, bins - 1);
        ++n[b];
        w[b].add(weights[i]);
        total.add(weights[i]);
    }
    std::ostringstream out;
    out << "bin_lo\tbin_hi\tn_roles\tweighted_share_pct\n";
    for (std::size_t b = 0; b < bins; ++b) {
        const double share = total.value() > 0.0 ? 100.0 * w[b].value() / total.value() : 0.0;
        out << std::fixed << std::setprecision(2) << static_cast<double>(b) / bins << '\t'
            << static_cast<double>(b + 1) / bins << '\t' << n[b] << '\t' << share << '\n';
    }
    return out.str();
}

std::vector<ClusterSummaryRow> cluster_summary(const std::vector<ExposureCluster>& labels,
                                               const std::vector<double>& E, const std::vector<double>& sigma) {
    if (labels.size() != E.size() || E.size() != sigma.size()) {
        throw PreconditionError("cluster_summary: length mismatch");
    }
    std::vector<ClusterSummaryRow> rows;
    for (std::size_t c = 0; c < 4; ++c) {
        ClusterSummaryRow row;
        row.cluster = static_cast<ExposureCluster>(c);
        CompensatedSum se, ss;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] != row.cluster) continue;
            if (row.n == 0) {
                row.max_exposure = E[i];
                row.min_exposure = E[i];
            }
            ++row.n;
            se.add(E[i]);
            ss.add(sigma[i]);
            row.max_exposure = std::max(row.max_exposure, E[i]);
            row.min_exposure = std::min(row.min_exposure, E[i]);
        }
        if (row.n == 0) continue;
        row.mean_exposure = se.value() / static_cast<double>(row.n);
        row.mean_std = ss.value() / static_cast<double>(row.n);
        rows.push_back(row);
    }
    return rows;
}

std::string cluster_summary_table(const std::vector<ClusterSummaryRow>& rows) {
    std::ostringstream out;
    out << "cluster\tn\tmean_exposure\tmean_std\tmax_exposure\tmin_exposure\n";
    for (const auto& r : rows) {
        out << exposure_cluster_name(r.cluster) << '\t' << r.n << '\t' << std::fixed << std::setprecision(3)
            << r.mean_exposure << '\t' << r.mean_std << '\t' << r.max_exposure << '\t' << r.min_exposure << '\n';
    }
    return out.str();
}

std::string theme_table(const std::array<double, 6>& shares, std::size_t n) {
    std::ostringstream out;
    out << "theme\tn_reasonings\tshare_pct\n";
    for (std::size_t i = 0; i < 6; ++i) {
        out << kThemeNames[i] << '\t' << n << '\t' << std::fixed << std::setprecision(2) << 100.0 * shares[i]
            << '\n';
    }
    return out.str();
}

std::string focus_decile_table(const std::vector<DecileFocus>& rows) {
    std::map<int, std::map<std::string, std::pair<std::size_t, CompensatedSum>>> cells;
    std::map<int, CompensatedSum> totals;
    for (const auto& r : rows) {
        auto& cell = cells[r.decile][r.category];
        ++cell.first;
        cell.second.add(r.weight);
        totals[r.decile].add(r.weight);
    }
    std::ostringstream out;
    out << "decile\tcategory\tn_roles\tweighted_share_pct\n";
    for (const auto& [decile, by_cat] : cells) {
        for (const auto& [cat, cell] : by_cat) {
            const double t = totals[decile].value();
            out << decile << '\t' << cat << '\t' << cell.first << '\t' << std::fixed << std::setprecision(2)
                << (t > 0.0 ? 100.0 * cell.second.value() / t : 0.0) << '\n';
        }
    }
    return out.str();
}

std::vector<std::vector<std::string>> parse_tsv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(split(line, '\t'));
    }
    return rows;
}

} // namespace taskexposure
