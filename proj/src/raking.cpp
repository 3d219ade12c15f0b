#include "taskexposure/raking.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace taskexposure {

std::string dimension_name(Dimension d) {
    switch (d) {
    case Dimension::Department: return "department";
    case Dimension::Grade: return "grade";
    case Dimension::Profession: return "profession";
    }
    return "department";
}

const std::map<std::string, double>& MarginalSet::targets(Dimension d) const {
    switch (d) {
    case Dimension::Department: return department;
    case Dimension::Grade: return grade;
    case Dimension::Profession: return profession;
    }
    return department;
}

std::map<std::string, double>& MarginalSet::targets(Dimension d) {
    return const_cast<std::map<std::string, double>&>(std::as_const(*this).targets(d));
}

void MarginalSet::normalize() {
    for (Dimension d : kRakingOrder) {
        auto& t = targets(d);
        CompensatedSum sum;
        for (const auto& [name, v] : t) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw PreconditionError("marginal " + dimension_name(d) + "=" + name + " is negative or non-finite");
            }
            sum.add(v);
        }
        if (!(sum.value() > 0.0)) throw PreconditionError("marginals for " + dimension_name(d) + " sum to zero");
        const double s = sum.value();
        for (auto& [name, v] : t) v /= s;
    }
}

void MarginalSet::validate() const {
    for (Dimension d : kRakingOrder) {
        CompensatedSum sum;
        for (const auto& [name, v] : targets(d)) {
            if (!(v >= 0.0)) throw PreconditionError("negative marginal " + dimension_name(d) + "=" + name);
            sum.add(v);
        }
        if (std::abs(sum.value() - 1.0) > 1e-9) {
            throw PreconditionError("marginals for " + dimension_name(d) + " sum to " + std::to_string(sum.value()));
        }
    }
}

MarginalSet marginals_from_reference(const ReferenceTables& ref, const std::vector<std::string>& sampled_departments) {
    const std::set<std::string> sampled(sampled_departments.begin(), sampled_departments.end());
    MarginalSet m;
    CompensatedSum all, other;
    std::map<std::string, CompensatedSum> dept, grade;
    for (const auto& [key, cell] : ref.fte) {
        if (!cell.has_value() || key.second == GradeBucket::Unmapped) continue;
        all.add(cell.value);
        grade[grade_name(key.second)].add(cell.value);
        if (sampled.count(key.first)) {
            dept[key.first].add(cell.value);
        } else {
            other.add(cell.value);
        }
    }
    for (const auto& d : sampled) {
        auto it = dept.find(d);
        m.department[d] = it == dept.end() ? 0.0 : it->second.value();
    }
    m.department[kOtherDepts] = other.value();
    for (auto& [g, s] : grade) m.grade[g] = s.value();
    for (const auto& [p, cell] : ref.profession_fte) {
        if (cell.has_value()) m.profession[p] = cell.value;
    }
    m.N = ref.population_total > 0.0 ? ref.population_total : all.value();
    m.normalize();
    return m;
}

const std::string& SampleRow::category(Dimension d) const {
    switch (d) {
    case Dimension::Department: return department;
    case Dimension::Grade: return grade;
    case Dimension::Profession: return profession;
    }
    return department;
}

double WeightedSample::total_weight() const {
    CompensatedSum s;
    for (const auto& r : rows) s.add(r.weight);
    return s.value();
}

WeightedSample append_other_depts(WeightedSample sample, const MarginalSet& marginals) {
    if (!marginals.department.count(kOtherDepts)) {
        throw PreconditionError("department marginals have no OTHER_DEPTS entry");
    }
    std::set<std::pair<std::string, std::string>> combos;
    std::set<std::pair<std::string, std::string>> existing;
    for (const auto& r : sample.rows) {
        if (r.department == kOtherDepts) {
            existing.emplace(r.grade, r.profession);
        } else {
            combos.emplace(r.grade, r.profession);
        }
    }
    for (const auto& [g, p] : combos) {
        if (existing.count({g, p})) continue;
        SampleRow row;
        row.key = std::string(kOtherDepts) + "|" + g + "|" + p;
        row.department = kOtherDepts;
        row.grade = g;
        row.profession = p;
        row.weight = 1.0;
        row.synthetic = true;
        sample.rows.push_back(std::move(row));
    }
    return sample;
}

std::map<std::string, double> weighted_shares(const WeightedSample& sample, Dimension d) {
    std::map<std::string, CompensatedSum> sums;
    CompensatedSum total;
    for (const auto& r : sample.rows) {
        sums[r.category(d)].add(r.weight);
        total.add(r.weight);
    }
    std::map<std::string, double> out;
    const double t = total.value();
    for (auto& [c, s] : sums) out[c] = t > 0.0 ? s.value() / t : 0.0;
    return out;
}

namespace {

double marginal_residual(const WeightedSample& sample, const MarginalSet& marginals) {
    double worst = 0.0;
    for (Dimension d : kRakingOrder) {
        const auto shares = weighted_shares(sample, d);
        for (const auto& [c, target] : marginals.targets(d)) {
            auto it = shares.find(c);
            worst = std::max(worst, std::abs((it == shares.end() ? 0.0 : it->second) - target));
        }
    }
    return worst;
}

} // namespace

WeightedSample rake(WeightedSample sample, const MarginalSet& marginals, const RakeOptions& options,
                    Diagnostics& diag) {
    if (sample.rows.empty()) throw PreconditionError("rake: empty sample");
    if (!(options.tol > 0.0) || options.max_iter == 0) throw PreconditionError("rake: tol and max_iter must be positive");
    marginals.validate();
    for (Dimension d : kRakingOrder) {
        const auto& t = marginals.targets(d);
        std::set<std::string> present;
        for (const auto& r : sample.rows) {
            if (!t.count(r.category(d))) {
                throw DataError("rake: " + dimension_name(d) + " category '" + r.category(d) +
                                "' has no population marginal");
            }
            present.insert(r.category(d));
        }
        for (const auto& [c, target] : t) {
            if (target > 0.0 && !present.count(c)) {
                throw DataError("rake: empty cell " + dimension_name(d) + "=" + c + " has target share " +
                                std::to_string(target) + " but no sample rows; merge it into another category");
            }
        }
    }

    for (auto& r : sample.rows) r.weight = 1.0;
    sample.history.clear();
    sample.converged = false;
    sample.iterations = 0;
    const std::size_t n = sample.rows.size();
    std::vector<double> prev(n);
    for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
        for (std::size_t j = 0; j < n; ++j) prev[j] = sample.rows[j].weight;
        for (Dimension d : kRakingOrder) {
            const auto shares = weighted_shares(sample, d);
            const auto& t = marginals.targets(d);
            for (auto& r : sample.rows) {
                const double s = shares.at(r.category(d));
                r.weight = s > 0.0 ? r.weight * (t.at(r.category(d)) / s) : 0.0;
            }
        }
        double change = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (prev[j] > 0.0) change = std::max(change, std::abs(sample.rows[j].weight - prev[j]) / prev[j]);
        }
        sample.history.push_back(change);
        sample.iterations = iter + 1;
        if (change < options.tol) {
            sample.converged = true;
            break;
        }
    }
    sample.residual = marginal_residual(sample, marginals);
    if (!sample.converged) {
        std::ostringstream msg;
        msg << "raking stopped after " << sample.iterations << " iterations; last max relative change "
            << sample.history.back() << ", marginal residual " << sample.residual;
        diag.warn("raking_not_converged", msg.str());
    }
    return sample;
}

WeightedSample scale_to_population(WeightedSample sample, double N) {
    if (!(N > 0.0)) throw PreconditionError("scale_to_population: N must be positive");
    const double total = sample.total_weight();
    if (!(total > 0.0)) throw PreconditionError("scale_to_population: weights sum to zero");
    const double f = N / total;
    for (auto& r : sample.rows) r.weight *= f;
    return sample;
}

} // namespace taskexposure
