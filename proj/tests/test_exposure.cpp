#include "taskexposure/exposure.hpp"
#include "taskexposure/prompts.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace taskexposure;
using nlohmann::json;

namespace {

const std::string kSrc = TE_SOURCE_DIR;

std::vector<TaskRecord> tasks_of(const std::vector<double>& scores) {
    std::vector<TaskRecord> out;
    for (std::size_t i = 0; i < scores.size(); ++i) out.push_back(make_task(static_cast<int>(i + 1), "t", scores[i]));
    return out;
}

BatchPolicy fast_policy() {
    BatchPolicy p;
    p.backoff_base = std::chrono::milliseconds(0);
    return p;
}

} // namespace

TEST_SUITE("exposure") {

TEST_CASE("band boundaries") {
    CHECK(classify_exposure(0.0).band == Band::VeryLow);
    CHECK(classify_exposure(0.2999).band == Band::VeryLow);
    CHECK(classify_exposure(0.3).band == Band::Low);
    CHECK(classify_exposure(0.4999).band == Band::Low);
    CHECK(classify_exposure(0.5).band == Band::Medium);
    CHECK(classify_exposure(0.6999).band == Band::Medium);
    CHECK(classify_exposure(0.7).band == Band::High);
    CHECK(classify_exposure(0.7).h == 1);
    CHECK(classify_exposure(0.69).h == 0);
    CHECK(classify_exposure(1.0).band == Band::High);
    CHECK_THROWS_AS(classify_exposure(-0.01), PreconditionError);
    CHECK_THROWS_AS(classify_exposure(1.01), PreconditionError);
    CHECK_THROWS_AS(classify_exposure(std::nan("")), PreconditionError);
}

TEST_CASE("bands are exhaustive and exclusive") {
    for (int i = 0; i <= 1000; ++i) {
        const double e = i / 1000.0;
        const Band b = classify_exposure(e).band;
        const int hits = (e < 0.3) + (e >= 0.3 && e < 0.5) + (e >= 0.5 && e < 0.7) + (e >= 0.7);
        CHECK(hits == 1);
        CHECK(static_cast<int>(b) == (e < 0.3 ? 0 : e < 0.5 ? 1 : e < 0.7 ? 2 : 3));
    }
}

TEST_CASE("decay weights T=4 frozen oracle") {
    // 1, .75, .5625, .421875 over 2.734375
    const auto w = DecayWeights::decay(4, 0.75);
    const double expect[] = {0.3657142857142857, 0.2742857142857143, 0.2057142857142857, 0.1542857142857143};
    for (std::size_t i = 0; i < 4; ++i) CHECK(w[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("decay weights T=6 printed values") {
    const auto w = DecayWeights::decay(6, kDefaultDelta);
    const double printed[] = {0.30, 0.23, 0.17, 0.13, 0.10, 0.07};
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(w[i] - printed[i]) <= 0.005);
}

TEST_CASE("decay weights properties") {
    for (std::size_t T : {1u, 2u, 7u, 40u}) {
        for (double d : {0.1, 0.5, 0.75, 1.0}) {
            const auto w = DecayWeights::decay(T, d);
            double s = 0;
            for (double x : w.normalized()) s += x;
            CHECK(std::abs(s - 1.0) <= 1e-12);
            for (std::size_t i = 1; i < T; ++i) CHECK(w[i] <= w[i - 1]);
        }
    }
    CHECK(DecayWeights::equal(5)[3] == doctest::Approx(0.2));
    CHECK_THROWS_AS(DecayWeights::decay(0, 0.5), PreconditionError);
    CHECK_THROWS_AS(DecayWeights::decay(3, 0.0), PreconditionError);
    CHECK_THROWS_AS(DecayWeights::decay(3, 1.5), PreconditionError);
    CHECK_THROWS_AS(DecayWeights::from_values({0.0, 0.0}), PreconditionError);
    CHECK_THROWS_AS(DecayWeights::from_values({-1.0, 2.0}), PreconditionError);
}

TEST_CASE("weighted exposure against direct formula") {
    const std::vector<double> e{0.8, 0.9, 0.6, 0.4, 0.3, 0.2};
    const auto r = role_exposure(tasks_of(e), DecayWeights::decay(6, 0.75));
    double num = 0, den = 0;
    for (int t = 0; t < 6; ++t) {
        num += std::pow(0.75, t) * e[static_cast<std::size_t>(t)];
        den += std::pow(0.75, t);
    }
    CHECK(r.E == doctest::Approx(num / den).epsilon(1e-14));
    CHECK(r.E == doctest::Approx(0.645857).epsilon(1e-6));
    const auto eq = role_exposure(tasks_of(e), DecayWeights::equal(6));
    CHECK(eq.E == doctest::Approx(3.2 / 6.0).epsilon(1e-14));
}

TEST_CASE("six-task role allocation with printed weights") {
    const auto tasks = tasks_of({0.8, 0.9, 0.6, 0.4, 0.3, 0.2});
    const auto r = role_exposure(tasks, DecayWeights::from_values({0.30, 0.23, 0.17, 0.13, 0.10, 0.07}), 38680.0);
    CHECK(r.H == doctest::Approx(0.53));
    CHECK(r.M == doctest::Approx(0.17));
    REQUIRE(r.value_per_task);
    const double printed[] = {11604, 8896, 6575, 5028, 3868, 2707};
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs((*r.value_per_task)[i] - printed[i]) <= 1.0);
}

TEST_CASE("role invariants") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t T = 1 + rng() % 12;
        std::vector<double> e(T);
        for (double& x : e) x = u(rng);
        const double salary = 20000 + 60000 * u(rng);
        const auto w = DecayWeights::decay(T, 0.3 + 0.7 * u(rng));
        const auto r = role_exposure(tasks_of(e), w, salary);
        double hours = 0, value = 0;
        for (double h : r.hours_per_task) hours += h;
        for (double v : *r.value_per_task) value += v;
        CHECK(std::abs(hours - 37.0) <= 1e-9);
        CHECK(std::abs(value - salary) <= 0.01);
        CHECK(r.H >= 0.0);
        CHECK(r.H <= 1.0 + 1e-12);
        const bool any_high = std::any_of(e.begin(), e.end(), [](double x) { return x >= 0.7; });
        const bool all_high = std::all_of(e.begin(), e.end(), [](double x) { return x >= 0.7; });
        CHECK((r.H == 0.0) == !any_high);
        CHECK((std::abs(r.H - 1.0) < 1e-12) == all_high);
        // raising one score never lowers E
        auto e2 = e;
        const std::size_t k = rng() % T;
        e2[k] = std::min(1.0, e2[k] + 0.1);
        CHECK(role_exposure(tasks_of(e2), w).E >= r.E - 1e-15);
    }
}

TEST_CASE("zero-weight extension leaves E unchanged") {
    const std::vector<double> e{0.2, 0.9, 0.5};
    const auto base = role_exposure(tasks_of(e), DecayWeights::from_values({3, 2, 1}));
    const auto ext = role_exposure(tasks_of({0.2, 0.9, 0.5, 1.0}), DecayWeights::from_values({3, 2, 1, 0}));
    CHECK(ext.E == doctest::Approx(base.E).epsilon(1e-15));
    CHECK(ext.sigma == doctest::Approx(base.sigma).epsilon(1e-15));
}

TEST_CASE("constant scores have zero spread") {
    const auto r = role_exposure(tasks_of({0.42, 0.42, 0.42, 0.42}), DecayWeights::decay(4, 0.6));
    CHECK(r.E == doctest::Approx(0.42));
    CHECK(r.sigma == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("length mismatch and empty roles") {
    CHECK_THROWS_AS(role_exposure(tasks_of({0.1, 0.2}), DecayWeights::equal(3)), PreconditionError);
    CHECK_THROWS_AS(role_exposure({}, DecayWeights::equal(1)), PreconditionError);
}

TEST_CASE("single task list") {
    const auto s = aggregate_scores({0.5}, Weighting::equal_weights());
    CHECK(s.mean == 0.5);
    CHECK(s.std == 0.0);
}

TEST_CASE("external task lists through a strict mock") {
    const json doc = json::parse(read_file(kSrc + "/fixtures/external_task_lists.json"));
    for (const char* name : {"unordered_12", "ranked_13"}) {
        CAPTURE(name);
        const json& list = doc.at(name);
        const auto tasks = list.at("tasks").get<std::vector<std::string>>();
        const auto scores = list.at("scores").get<std::vector<double>>();
        json payload{{"scores", json::object()}};
        for (std::size_t i = 0; i < scores.size(); ++i) payload["scores"][std::to_string(i + 1)] = scores[i];
        MockProvider m;
        m.add_fixture(scoring_request("any", tasks), payload.dump());
        const Weighting w = list.at("weighting") == "equal" ? Weighting::equal_weights()
                                                            : Weighting::decay(list.at("delta").get<double>());
        const auto s = score_task_list(tasks, m, w, fast_policy());
        CHECK(s.scores == scores);
        CHECK(std::abs(s.mean - list["expected"]["mean"].get<double>()) <= 0.005);
        CHECK(std::abs(s.std - list["expected"]["std"].get<double>()) <= 0.005);
    }
}

TEST_CASE("task list scoring failure propagates") {
    MockProvider m;
    CHECK_THROWS_AS(score_task_list({"a"}, m, Weighting::equal_weights(), fast_policy()), ProviderError);
    CHECK_THROWS_AS(score_task_list({}, m, Weighting::equal_weights(), fast_policy()), PreconditionError);
}

TEST_CASE("PMO description extracts seven tasks from fixture") {
    Diagnostics d;
    const auto vs = parse_vacancies_file(kSrc + "/fixtures/corpus.jsonl", d);
    const auto it = std::find_if(vs.begin(), vs.end(), [](const Vacancy& v) { return v.vacancy_id == "HO-001"; });
    REQUIRE(it != vs.end());
    const json fx = json::parse(read_file(kSrc + "/fixtures/pmo_extraction.json"));
    ExtractionOptions opt;
    opt.policy = fast_policy();
    MockProvider m;
    m.add_fixture(extraction_request("x", it->job_description, opt.max_description_chars), fx.at("payload").dump());
    const auto out = extract_role_tasks(*it, m, opt, d);
    CHECK(out.status == ExtractionStatus::Ok);
    REQUIRE(out.tasks.size() == 7);
    CHECK(out.tasks[6].task_number == 7);
    CHECK(out.tasks[1].band == Band::High);
    CHECK_FALSE(out.used_summary);
}

TEST_CASE("summary fallback and dropping") {
    Vacancy a;
    a.vacancy_id = "A";
    a.job_description = "Only one thing.";
    a.job_summary = "Plan work. Lead people.";
    Vacancy b;
    b.vacancy_id = "B";
    b.job_description = "One task.";
    Vacancy c;
    c.vacancy_id = "C";
    c.job_summary = "Summary only.";
    ExtractionOptions opt;
    opt.policy = fast_policy();
    auto payload = [](int n) {
        json t = json::array();
        for (int i = 0; i < n; ++i) t.push_back({{"task_number", i + 1}, {"task_details", "x"}, {"exposure_score", 0.5}});
        return json{{"tasks", t}}.dump();
    };
    MockProvider m;
    m.add_fixture(extraction_request("", a.job_description, opt.max_description_chars), payload(1));
    m.add_fixture(extraction_request("", a.job_summary, opt.max_description_chars), payload(2));
    m.add_fixture(extraction_request("", b.job_description, opt.max_description_chars), payload(1));
    m.add_fixture(extraction_request("", c.job_summary, opt.max_description_chars), payload(3));
    Diagnostics d;
    BatchReport rep;
    const auto out = extract_corpus({a, b, c}, m, opt, d, &rep);
    CHECK(out[0].status == ExtractionStatus::Ok);
    CHECK(out[0].used_summary);
    CHECK(out[0].tasks.size() == 2);
    CHECK(out[1].status == ExtractionStatus::Dropped);
    CHECK(out[2].status == ExtractionStatus::Ok);
    CHECK(out[2].tasks.size() == 3);
    CHECK(d.count("role_dropped") == 1);
    CHECK(rep.reconciles());
    CHECK(rep.submitted == 4);
}

TEST_CASE("extraction renumbers tasks in array order") {
    const json p{{"tasks",
                  {{{"task_number", 5}, {"task_details", " b "}, {"exposure_score", 0.1}},
                   {{"task_number", 2}, {"task_details", "a"}, {"exposure_score", 0.9}}}}};
    const auto t = tasks_from_payload(p);
    CHECK(t[0].task_number == 1);
    CHECK(t[0].task_details == "b");
    CHECK(t[1].task_number == 2);
    CHECK(t[1].h == 1);
}

}
