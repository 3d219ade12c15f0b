#pragma once

#include <optional>
#include <vector>

namespace taskexposure {

/// Pearson correlation. Throws PreconditionError on length mismatch, fewer
/// than two values or zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Average ranks (1-based), ties share the mean rank.
std::vector<double> average_ranks(const std::vector<double>& x);

/// Pearson on average ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// ratings[rater][item]; nullopt marks a missing rating.
using RatingMatrix = std::vector<std::vector<std::optional<double>>>;

/// Interval-metric Krippendorff's alpha from the coincidence matrix.
/// Items with fewer than two ratings are ignored. Throws PreconditionError
/// with fewer than two raters, ragged rows, no pairable item, or zero
/// expected disagreement.
double krippendorff_alpha(const RatingMatrix& ratings);

} // namespace taskexposure
