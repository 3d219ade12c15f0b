#pragma once

#include "taskexposure/common.hpp"
#include "taskexposure/exposure.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace taskexposure {

enum class SavingsClass { CostReduction, ProductivityGain, NoImpact };
std::string savings_class_name(SavingsClass c);

/// NoImpact if H = 0, CostReduction if H >= theta, else ProductivityGain.
SavingsClass classify_role(double H, double theta);

struct SavingsInput {
    std::string key;
    double H = 0.0;
    double M = 0.0; // medium-band time share
    std::optional<double> salary;
};

SavingsInput savings_input(std::string key, const RoleExposure& exposure);

struct RoleSavings {
    double H = 0.0;
    SavingsClass cls = SavingsClass::NoImpact;
    std::optional<double> C;
    std::optional<double> P;
    std::optional<double> P_upper;
    double freed_hours = 0.0;
};

/// Monetary fields are absent when the role has no salary.
RoleSavings role_savings(const SavingsInput& role, double theta, Diagnostics* diag = nullptr);

/// 0.00, 0.05, ..., 1.00.
std::vector<double> default_theta_grid();

struct SweepPoint {
    double theta = 0.0;
    double C = 0.0;
    double P = 0.0;
    double P_upper = 0.0;
    double ratio = 0.0; // +inf when C = 0
    std::size_t n_cost = 0;
    std::size_t n_prod = 0;
    std::size_t n_noimpact = 0;
    double freed_hours = 0.0;    // weighted, productivity-gain roles only
    std::size_t n_no_salary = 0; // counted in classes, left out of money
};

struct SweepCurve {
    std::vector<SweepPoint> points;

    const SweepPoint& at(double theta) const;
};

/// Weighted totals per threshold. Throws PreconditionError when weights and
/// roles differ in length or a theta lies outside [0,1].
SweepCurve sweep(const std::vector<SavingsInput>& roles, const std::vector<double>& weights,
                 const std::vector<double>& theta_grid);

/// "inf" for an infinite ratio, fixed notation otherwise.
std::string format_ratio(double ratio);

/// Tab-separated: theta, C, P, P_upper, ratio, n_cost, n_prod, n_noimpact.
std::string sweep_table(const SweepCurve& curve);

struct RawRole {
    std::string key;
    std::vector<TaskRecord> tasks;
    std::optional<double> salary;
};

/// Recomputes weights, H and M for each delta and sweeps.
std::map<double, SweepCurve> decay_sensitivity(const std::vector<RawRole>& roles, const std::vector<double>& weights,
                                               const std::vector<double>& deltas,
                                               const std::vector<double>& theta_grid);

/// Cost-reduction and productivity rows at `theta`, one column per delta with
/// percentage change from `baseline_delta`.
std::string decay_sensitivity_table(const std::map<double, SweepCurve>& curves, double theta,
                                    double baseline_delta = kDefaultDelta);

} // namespace taskexposure
