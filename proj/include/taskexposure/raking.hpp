#pragma once

#include "taskexposure/common.hpp"
#include "taskexposure/corpus.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace taskexposure {

inline constexpr const char* kOtherDepts = "OTHER_DEPTS";

enum class Dimension { Department, Grade, Profession };
inline constexpr std::array<Dimension, 3> kRakingOrder = {Dimension::Department, Dimension::Grade,
                                                           Dimension::Profession};
std::string dimension_name(Dimension d);

struct MarginalSet {
    std::map<std::string, double> department;
    std::map<std::string, double> grade;
    std::map<std::string, double> profession;
    double N = 0.0;

    const std::map<std::string, double>& targets(Dimension d) const;
    std::map<std::string, double>& targets(Dimension d);

    /// Rescales each dimension to sum to one; throws PreconditionError on
    /// negative, non-finite or all-zero targets.
    void normalize();
    /// Throws PreconditionError unless every dimension sums to 1 within 1e-9.
    void validate() const;
};

/// Department shares over `sampled_departments` plus an OTHER_DEPTS remainder,
/// grade shares over mapped grades and profession shares, all from FTE.
/// Suppressed cells are left out of every sum.
MarginalSet marginals_from_reference(const ReferenceTables& ref, const std::vector<std::string>& sampled_departments);

struct SampleRow {
    std::string key;
    std::string department;
    std::string grade;
    std::string profession;
    double weight = 1.0;
    bool synthetic = false;

    const std::string& category(Dimension d) const;
};

struct WeightedSample {
    std::vector<SampleRow> rows;
    /// Max relative weight change per completed iteration.
    std::vector<double> history;
    std::size_t iterations = 0;
    bool converged = false;
    /// Largest |weighted share - target| after the last iteration.
    double residual = 0.0;

    double total_weight() const;
};

/// One OTHER_DEPTS row per (grade, profession) present among real rows;
/// rows already present are not duplicated.
WeightedSample append_other_depts(WeightedSample sample, const MarginalSet& marginals);

struct RakeOptions {
    double tol = 1e-6;
    std::size_t max_iter = 30;
};

/// Sequential IPF over department -> grade -> profession, starting from unit
/// weights. Throws DataError for categories missing from the marginals or a
/// positive target with no sample rows. Non-convergence is a warning.
WeightedSample rake(WeightedSample sample, const MarginalSet& marginals, const RakeOptions& options,
                    Diagnostics& diag);

/// w_j * N / sum(w). Throws PreconditionError when the weights sum to zero.
WeightedSample scale_to_population(WeightedSample sample, double N);

/// Weighted share of each category in a dimension.
std::map<std::string, double> weighted_shares(const WeightedSample& sample, Dimension d);

} // namespace taskexposure
