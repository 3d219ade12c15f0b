#include "taskexposure/savings.hpp"
#include "taskexposure/random.hpp"

#include <doctest.h>

#include <cmath>

using namespace taskexposure;

TEST_SUITE("savings") {

TEST_CASE("classification boundaries") {
    CHECK(classify_role(0.0, 0.0) == SavingsClass::NoImpact);
    CHECK(classify_role(0.53, 0.8) == SavingsClass::ProductivityGain);
    CHECK(classify_role(0.53, 0.5) == SavingsClass::CostReduction);
    CHECK(classify_role(0.53, 0.53) == SavingsClass::CostReduction);
    CHECK(classify_role(1.0, 1.0) == SavingsClass::CostReduction);
    CHECK(classify_role(0.99, 1.0) == SavingsClass::ProductivityGain);
}

TEST_CASE("role savings with H and M") {
    const SavingsInput in{"r", 0.53, 0.17, 38680.0};
    const auto p = role_savings(in, 0.8);
    CHECK(*p.C == 0.0);
    CHECK(*p.P == doctest::Approx(0.53 * 38680.0));
    CHECK(*p.P_upper == doctest::Approx(0.70 * 38680.0));
    CHECK(p.freed_hours == doctest::Approx(0.53 * 37.0));
    const auto c = role_savings(in, 0.5);
    CHECK(*c.C == 38680.0);
    CHECK(*c.P == 0.0);
    CHECK(c.freed_hours == 0.0);
    Diagnostics d;
    const auto none = role_savings({"x", 0.4, 0.0, std::nullopt}, 0.8, &d);
    CHECK_FALSE(none.P.has_value());
    CHECK(d.count("no_salary") == 1);
}

TEST_CASE("grid") {
    const auto g = default_theta_grid();
    REQUIRE(g.size() == 21);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 1.0);
    CHECK(g[16] == doctest::Approx(0.8));
}

TEST_CASE("three-role sweep oracle") {
    // A: H .9 S 30000 w 2; B: H .4 M .2 S 50000 w 1; C: H 0 S 20000 w 5
    const std::vector<SavingsInput> roles{{"A", 0.9, 0.0, 30000.0}, {"B", 0.4, 0.2, 50000.0}, {"C", 0.0, 0.5, 20000.0}};
    const std::vector<double> w{2, 1, 5};
    const auto curve = sweep(roles, w, default_theta_grid());
    const auto& p80 = curve.at(0.8);
    CHECK(p80.C == doctest::Approx(60000.0));
    CHECK(p80.P == doctest::Approx(20000.0));
    CHECK(p80.P_upper == doctest::Approx(30000.0));
    CHECK(p80.ratio == doctest::Approx(1.0 / 3.0));
    CHECK(p80.n_cost == 1);
    CHECK(p80.n_prod == 1);
    CHECK(p80.n_noimpact == 1);
    CHECK(p80.freed_hours == doctest::Approx(0.4 * 37.0));
    const auto& p95 = curve.at(0.95);
    CHECK(p95.C == 0.0);
    CHECK(p95.P == doctest::Approx(2 * 0.9 * 30000.0 + 20000.0));
    CHECK(std::isinf(p95.ratio));
    CHECK(format_ratio(p95.ratio) == "inf");
    const auto& p0 = curve.at(0.0);
    CHECK(p0.C == doctest::Approx(110000.0));
    CHECK(p0.n_noimpact == 1);
    CHECK_THROWS_AS(curve.at(0.33), PreconditionError);
}

TEST_CASE("sweep preconditions and missing salary") {
    CHECK_THROWS_AS(sweep({{"a", 0.5, 0, 1.0}}, {}, {0.5}), PreconditionError);
    CHECK_THROWS_AS(sweep({{"a", 0.5, 0, 1.0}}, {1.0}, {1.5}), PreconditionError);
    const auto c = sweep({{"a", 0.5, 0, std::nullopt}, {"b", 0.5, 0, 100.0}}, {1, 1}, {0.8});
    CHECK(c.points[0].n_no_salary == 1);
    CHECK(c.points[0].n_prod == 2);
    CHECK(c.points[0].P == doctest::Approx(50.0));
}

TEST_CASE("monotone in theta on random roles") {
    Rng rng(99);
    std::vector<SavingsInput> roles;
    std::vector<double> w;
    for (int i = 0; i < 300; ++i) {
        const double H = uniform_unit(rng) < 0.2 ? 0.0 : std::round(uniform_unit(rng) * 40) / 40;
        roles.push_back({"r", H, 0.0, 20000 + 50000 * uniform_unit(rng)});
        w.push_back(1 + 10 * uniform_unit(rng));
    }
    const auto curve = sweep(roles, w, default_theta_grid());
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].C <= curve.points[i - 1].C + 1e-6);
        CHECK(curve.points[i].n_cost <= curve.points[i - 1].n_cost);
        CHECK(curve.points[i].n_noimpact == curve.points[0].n_noimpact);
    }
}

TEST_CASE("sweep table layout") {
    const auto curve = sweep({{"a", 0.5, 0.1, 1000.0}}, {1.0}, {0.0, 0.8});
    const std::string t = sweep_table(curve);
    CHECK(t.rfind("theta\tC\tP\tP_upper\tratio\tn_cost\tn_prod\tn_noimpact\n", 0) == 0);
    CHECK(t.find("0.80\t0\t500\t600\tinf\t0\t1\t0") != std::string::npos);
}

TEST_CASE("decay sensitivity recomputes H per delta") {
    std::vector<TaskRecord> tasks{make_task(1, "a", 0.9), make_task(2, "b", 0.1), make_task(3, "c", 0.1)};
    const std::vector<RawRole> roles{{"r", tasks, 10000.0}};
    const auto curves = decay_sensitivity(roles, {1.0}, {0.75, 0.5, 1.0}, default_theta_grid());
    // H = D_1 under each delta
    const double h75 = 1.0 / (1 + 0.75 + 0.5625), h50 = 1.0 / 1.75, h100 = 1.0 / 3.0;
    CHECK(curves.at(0.75).at(0.8).P == doctest::Approx(h75 * 10000));
    CHECK(curves.at(0.5).at(0.8).P == doctest::Approx(h50 * 10000));
    CHECK(curves.at(1.0).at(0.8).P == doctest::Approx(h100 * 10000));
    const std::string t = decay_sensitivity_table(curves, 0.8);
    CHECK(t.find("0.75 (Baseline)\t0.5 (High)\t1 (Equal)") != std::string::npos);
    CHECK(t.find("Productivity Gain") != std::string::npos);
    CHECK(t.find("(n/a)") != std::string::npos);
    CHECK_THROWS_AS(decay_sensitivity_table(curves, 0.8, 0.6), PreconditionError);
}

}
