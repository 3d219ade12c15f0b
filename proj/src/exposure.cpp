#include "taskexposure/exposure.hpp"

#include "taskexposure/prompts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using json = nlohmann::json;

namespace taskexposure {

std::string band_name(Band b) {
    switch (b) {
    case Band::VeryLow: return "VeryLow";
    case Band::Low: return "Low";
    case Band::Medium: return "Medium";
    case Band::High: return "High";
    }
    return "VeryLow";
}

Classification classify_exposure(double e) {
    if (!(e >= 0.0 && e <= 1.0)) throw PreconditionError("exposure score outside [0,1]: " + std::to_string(e));
    if (e < 0.3) return {Band::VeryLow, 0};
    if (e < 0.5) return {Band::Low, 0};
    if (e < 0.7) return {Band::Medium, 0};
    return {Band::High, 1};
}

TaskRecord make_task(int task_number, std::string details, double exposure) {
    const Classification c = classify_exposure(exposure);
    return {task_number, std::move(details), exposure, c.band, c.h};
}

DecayWeights DecayWeights::decay(std::size_t T, double delta) {
    if (T == 0) throw PreconditionError("decay weights need at least one task");
    if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionError("delta must lie in (0,1]: " + std::to_string(delta));
    DecayWeights w;
    w.delta_ = delta;
    w.raw_.resize(T);
    double d = 1.0;
    CompensatedSum total;
    for (std::size_t t = 0; t < T; ++t) {
        w.raw_[t] = d;
        total.add(d);
        d *= delta;
    }
    const double sum = total.value();
    w.normalized_.resize(T);
    for (std::size_t t = 0; t < T; ++t) w.normalized_[t] = w.raw_[t] / sum;
    return w;
}

DecayWeights DecayWeights::equal(std::size_t T) { return decay(T, 1.0); }

DecayWeights DecayWeights::from_values(std::vector<double> values) {
    if (values.empty()) throw PreconditionError("weights are empty");
    CompensatedSum total;
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError("weights must be finite and non-negative");
        total.add(v);
    }
    const double sum = total.value();
    if (!(sum > 0.0)) throw PreconditionError("weights sum to zero");
    DecayWeights w;
    w.delta_ = std::numeric_limits<double>::quiet_NaN();
    w.raw_ = values;
    w.normalized_.resize(values.size());
    for (std::size_t t = 0; t < values.size(); ++t) w.normalized_[t] = values[t] / sum;
    return w;
}

DecayWeights decay_weights(std::size_t T, double delta) { return DecayWeights::decay(T, delta); }

RoleExposure role_exposure(const std::vector<TaskRecord>& tasks, const DecayWeights& w, std::optional<double> salary) {
    if (tasks.empty()) throw PreconditionError("role has no tasks");
    if (tasks.size() != w.size()) {
        throw PreconditionError("task count " + std::to_string(tasks.size()) + " != weight count " +
                                std::to_string(w.size()));
    }
    RoleExposure r;
    CompensatedSum E, H, M;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        E.add(w[t] * tasks[t].exposure);
        H.add(w[t] * tasks[t].h);
        if (tasks[t].band == Band::Medium) M.add(w[t]);
    }
    r.E = E.value();
    r.H = H.value();
    r.M = M.value();
    CompensatedSum var;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const double d = tasks[t].exposure - r.E;
        var.add(w[t] * d * d);
    }
    r.sigma = std::sqrt(std::max(0.0, var.value()));
    r.hours_per_task.resize(tasks.size());
    for (std::size_t t = 0; t < tasks.size(); ++t) r.hours_per_task[t] = kHoursPerWeek * w[t];
    if (salary) {
        r.salary = salary;
        std::vector<double> value(tasks.size());
        for (std::size_t t = 0; t < tasks.size(); ++t) value[t] = *salary * w[t];
        r.value_per_task = std::move(value);
    }
    return r;
}

std::string extraction_status_name(ExtractionStatus s) {
    switch (s) {
    case ExtractionStatus::Ok: return "ok";
    case ExtractionStatus::Dropped: return "dropped";
    case ExtractionStatus::Failed: return "failed";
    }
    return "failed";
}

std::vector<TaskRecord> tasks_from_payload(const json& payload) {
    std::vector<TaskRecord> out;
    int n = 0;
    for (const auto& t : payload.at("tasks")) {
        out.push_back(make_task(++n, trim(t.at("task_details").get<std::string>()), t.at("exposure_score").get<double>()));
    }
    return out;
}

std::vector<ExtractionOutcome> extract_corpus(const std::vector<Vacancy>& vacancies, Provider& provider,
                                              const ExtractionOptions& options, Diagnostics& diag,
                                              BatchReport* report) {
    std::vector<ExtractionOutcome> out(vacancies.size());
    std::vector<StructuredRequest> first;
    std::vector<std::size_t> first_idx;
    std::vector<std::size_t> needs_summary;
    for (std::size_t i = 0; i < vacancies.size(); ++i) {
        out[i].vacancy_id = vacancies[i].vacancy_id;
        if (trim(vacancies[i].job_description).empty()) {
            needs_summary.push_back(i);
            continue;
        }
        first.push_back(extraction_request(vacancies[i].vacancy_id + "#description", vacancies[i].job_description,
                                           options.max_description_chars));
        first_idx.push_back(i);
    }
    BatchReport total;
    if (!first.empty()) {
        BatchResult r = submit_batch(provider, first, options.policy, options.cache);
        for (std::size_t k = 0; k < first.size(); ++k) {
            const std::size_t i = first_idx[k];
            if (const auto* resp = r.find(first[k].request_id)) {
                out[i].tasks = tasks_from_payload(resp->payload);
                if (out[i].tasks.size() >= options.min_tasks) {
                    out[i].status = ExtractionStatus::Ok;
                } else {
                    needs_summary.push_back(i);
                }
            } else {
                const BatchFailure* f = r.report.failure_for(first[k].request_id);
                out[i].status = ExtractionStatus::Failed;
                out[i].detail = f ? failure_class_name(f->failure) + ": " + f->message : "no response";
                diag.warn("extraction_failed", vacancies[i].vacancy_id + ": " + out[i].detail);
            }
        }
        total.merge(r.report);
    }
    std::sort(needs_summary.begin(), needs_summary.end());
    std::vector<StructuredRequest> second;
    std::vector<std::size_t> second_idx;
    for (std::size_t i : needs_summary) {
        if (trim(vacancies[i].job_summary).empty()) {
            out[i].status = ExtractionStatus::Dropped;
            out[i].detail = "fewer than " + std::to_string(options.min_tasks) + " tasks and no summary";
            diag.info("role_dropped", vacancies[i].vacancy_id + ": " + out[i].detail);
            continue;
        }
        second.push_back(extraction_request(vacancies[i].vacancy_id + "#summary", vacancies[i].job_summary,
                                            options.max_description_chars));
        second_idx.push_back(i);
    }
    if (!second.empty()) {
        BatchResult r = submit_batch(provider, second, options.policy, options.cache);
        for (std::size_t k = 0; k < second.size(); ++k) {
            const std::size_t i = second_idx[k];
            out[i].used_summary = true;
            if (const auto* resp = r.find(second[k].request_id)) {
                auto tasks = tasks_from_payload(resp->payload);
                if (tasks.size() >= options.min_tasks) {
                    out[i].tasks = std::move(tasks);
                    out[i].status = ExtractionStatus::Ok;
                } else {
                    out[i].tasks.clear();
                    out[i].status = ExtractionStatus::Dropped;
                    out[i].detail = "fewer than " + std::to_string(options.min_tasks) + " tasks from both fields";
                    diag.info("role_dropped", vacancies[i].vacancy_id + ": " + out[i].detail);
                }
            } else {
                const BatchFailure* f = r.report.failure_for(second[k].request_id);
                out[i].tasks.clear();
                out[i].status = ExtractionStatus::Failed;
                out[i].detail = f ? failure_class_name(f->failure) + ": " + f->message : "no response";
                diag.warn("extraction_failed", vacancies[i].vacancy_id + " (summary): " + out[i].detail);
            }
        }
        total.merge(r.report);
    }
    if (report) report->merge(total);
    return out;
}

ExtractionOutcome extract_role_tasks(const Vacancy& v, Provider& provider, const ExtractionOptions& options,
                                     Diagnostics& diag) {
    if (trim(v.job_description).empty() && trim(v.job_summary).empty()) {
        throw PreconditionError("vacancy " + v.vacancy_id + " has no description or summary");
    }
    return extract_corpus({v}, provider, options, diag).front();
}

TaskListScore aggregate_scores(const std::vector<double>& scores, Weighting weighting) {
    if (scores.empty()) throw PreconditionError("no task scores");
    std::vector<TaskRecord> tasks;
    for (std::size_t i = 0; i < scores.size(); ++i) tasks.push_back(make_task(static_cast<int>(i + 1), "", scores[i]));
    const DecayWeights w = weighting.equal ? DecayWeights::equal(scores.size())
                                           : DecayWeights::decay(scores.size(), weighting.delta);
    const RoleExposure r = role_exposure(tasks, w);
    return {scores, r.E, r.sigma};
}

TaskListScore score_task_list(const std::vector<std::string>& tasks, Provider& provider, Weighting weighting,
                              const BatchPolicy& policy, ResponseCache* cache) {
    if (tasks.empty()) throw PreconditionError("score_task_list needs at least one task");
    const StructuredRequest req = scoring_request("task-list", tasks);
    BatchResult r = submit_batch(provider, {req}, policy, cache);
    if (r.responses.empty()) {
        const auto& f = r.report.failed.front();
        throw ProviderError("task-list scoring failed (" + failure_class_name(f.failure) + "): " + f.message);
    }
    const json& scores = r.responses.front().payload.at("scores");
    std::vector<double> values(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) values[i] = scores.at(std::to_string(i + 1)).get<double>();
    return aggregate_scores(values, weighting);
}

json exposure_line(const std::string& vacancy_id, const TaskRecord& task, double weight, double hours,
                   std::optional<double> value) {
    return json{{"vacancy_id", vacancy_id},
                {"task_number", task.task_number},
                {"task_details", task.task_details},
                {"e_t", task.exposure},
                {"band", band_name(task.band)},
                {"h_t", task.h},
                {"D_t", weight},
                {"hours", hours},
                {"value", value ? json(*value) : json(nullptr)}};
}

} // namespace taskexposure
