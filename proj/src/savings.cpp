#include "taskexposure/savings.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace taskexposure {

std::string savings_class_name(SavingsClass c) {
    switch (c) {
    case SavingsClass::CostReduction: return "CostReduction";
    case SavingsClass::ProductivityGain: return "ProductivityGain";
    case SavingsClass::NoImpact: return "NoImpact";
    }
    return "NoImpact";
}

SavingsClass classify_role(double H, double theta) {
    if (H == 0.0) return SavingsClass::NoImpact;
    if (H >= theta) return SavingsClass::CostReduction;
    return SavingsClass::ProductivityGain;
}

SavingsInput savings_input(std::string key, const RoleExposure& exposure) {
    return {std::move(key), exposure.H, exposure.M, exposure.salary};
}

RoleSavings role_savings(const SavingsInput& role, double theta, Diagnostics* diag) {
    RoleSavings s;
    s.H = role.H;
    s.cls = classify_role(role.H, theta);
    const double ic = s.cls == SavingsClass::CostReduction ? 1.0 : 0.0;
    const double ip = s.cls == SavingsClass::ProductivityGain ? 1.0 : 0.0;
    s.freed_hours = ip * role.H * kHoursPerWeek;
    if (role.salary) {
        const double S = *role.salary;
        s.C = ic * S;
        s.P = ip * role.H * S;
        s.P_upper = ip * (role.H + role.M) * S;
    } else if (diag) {
        diag->info("no_salary", role.key + ": no salary; excluded from monetary totals");
    }
    return s;
}

std::vector<double> default_theta_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
    return grid;
}

const SweepPoint& SweepCurve::at(double theta) const {
    for (const auto& p : points) {
        if (std::abs(p.theta - theta) < 1e-12) return p;
    }
    throw PreconditionError("theta " + std::to_string(theta) + " is not on the sweep grid");
}

SweepCurve sweep(const std::vector<SavingsInput>& roles, const std::vector<double>& weights,
                 const std::vector<double>& theta_grid) {
    if (roles.size() != weights.size()) {
        throw PreconditionError("sweep: " + std::to_string(weights.size()) + " weights for " +
                                std::to_string(roles.size()) + " roles");
    }
    SweepCurve curve;
    for (double theta : theta_grid) {
        if (!(theta >= 0.0 && theta <= 1.0)) throw PreconditionError("sweep: theta outside [0,1]");
        SweepPoint pt;
        pt.theta = theta;
        CompensatedSum C, P, PU, hours;
        for (std::size_t j = 0; j < roles.size(); ++j) {
            const RoleSavings s = role_savings(roles[j], theta);
            switch (s.cls) {
            case SavingsClass::CostReduction: ++pt.n_cost; break;
            case SavingsClass::ProductivityGain: ++pt.n_prod; break;
            case SavingsClass::NoImpact: ++pt.n_noimpact; break;
            }
            hours.add(weights[j] * s.freed_hours);
            if (!roles[j].salary) {
                ++pt.n_no_salary;
                continue;
            }
            C.add(weights[j] * *s.C);
            P.add(weights[j] * *s.P);
            PU.add(weights[j] * *s.P_upper);
        }
        pt.C = C.value();
        pt.P = P.value();
        pt.P_upper = PU.value();
        pt.freed_hours = hours.value();
        pt.ratio = pt.C == 0.0 ? std::numeric_limits<double>::infinity() : pt.P / pt.C;
        curve.points.push_back(pt);
    }
    return curve;
}

std::string format_ratio(double ratio) {
    if (std::isinf(ratio)) return "inf";
    std::ostringstream s;
    s << std::fixed << std::setprecision(6) << ratio;
    return s.str();
}

std::string sweep_table(const SweepCurve& curve) {
    std::ostringstream out;
    out << "theta\tC\tP\tP_upper\tratio\tn_cost\tn_prod\tn_noimpact\n";
    for (const auto& p : curve.points) {
        out << std::fixed << std::setprecision(2) << p.theta << '\t' << std::setprecision(0) << p.C << '\t' << p.P
            << '\t' << p.P_upper << '\t' << format_ratio(p.ratio) << '\t' << p.n_cost << '\t' << p.n_prod << '\t'
            << p.n_noimpact << '\n';
    }
    return out.str();
}

std::map<double, SweepCurve> decay_sensitivity(const std::vector<RawRole>& roles, const std::vector<double>& weights,
                                               const std::vector<double>& deltas,
                                               const std::vector<double>& theta_grid) {
    std::map<double, SweepCurve> out;
    for (double delta : deltas) {
        std::vector<SavingsInput> inputs;
        inputs.reserve(roles.size());
        for (const auto& r : roles) {
            const RoleExposure e = role_exposure(r.tasks, DecayWeights::decay(r.tasks.size(), delta), r.salary);
            inputs.push_back(savings_input(r.key, e));
        }
        out[delta] = sweep(inputs, weights, theta_grid);
    }
    return out;
}

std::string decay_sensitivity_table(const std::map<double, SweepCurve>& curves, double theta, double baseline_delta) {
    auto base_it = curves.find(baseline_delta);
    if (base_it == curves.end()) throw PreconditionError("decay sensitivity has no baseline delta");
    auto label = [&](double d) {
        std::ostringstream s;
        s << d;
        if (d == baseline_delta) {
            s << " (Baseline)";
        } else if (d == 1.0) {
            s << " (Equal)";
        } else if (d < baseline_delta) {
            s << " (High)";
        } else {
            s << " (Low)";
        }
        return s.str();
    };
    std::vector<double> order{baseline_delta};
    for (const auto& [d, c] : curves) {
        if (d != baseline_delta && d < 1.0) order.push_back(d);
    }
    if (curves.count(1.0) && baseline_delta != 1.0) order.push_back(1.0);

    std::ostringstream out;
    out << "saving_type";
    for (double d : order) out << '\t' << label(d);
    out << '\n';
    const SweepPoint& base = base_it->second.at(theta);
    auto row = [&](const char* name, double SweepPoint::*field) {
        out << name;
        for (double d : order) {
            const double v = curves.at(d).at(theta).*field;
            out << '\t' << std::fixed << std::setprecision(0) << v;
            if (d != baseline_delta) {
                const double b = base.*field;
                if (b != 0.0) {
                    out << " (" << std::showpos << std::setprecision(0) << 100.0 * (v - b) / b << "%)"
                        << std::noshowpos;
                } else {
                    out << " (n/a)";
                }
            }
        }
        out << '\n';
    };
    row("Potential Cost Reduction", &SweepPoint::C);
    row("Productivity Gain", &SweepPoint::P);
    return out.str();
}

} // namespace taskexposure
