#include "taskexposure/agreement.hpp"
#include "taskexposure/corpus.hpp"
#include "taskexposure/exposure.hpp"
#include "taskexposure/pipeline.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>
#include <sstream>

using namespace taskexposure;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kProvider = 3 };

struct Flags {
    std::string config;
    std::optional<double> delta;
    std::optional<double> theta;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> provider;
    bool force = false;
};

void add_stage_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--delta", f.delta, "Decay rate in (0,1]");
    cmd->add_option("--theta", f.theta, "Automation threshold in [0,1]");
    cmd->add_option("--seed", f.seed, "Root seed");
    cmd->add_option("--provider", f.provider, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
    cmd->add_flag("--force", f.force, "Rerun even when current");
}

// Defaults, then flags, then the config file.
PipelineConfig build_config(const Flags& f) {
    PipelineConfig base;
    if (f.delta) base.delta = *f.delta;
    if (f.theta) base.theta = *f.theta;
    if (f.seed) base.seed = *f.seed;
    if (f.provider) base.provider.kind = *f.provider;
    return PipelineConfig::load(f.config, base);
}

void print_result(const StageResult& r) {
    std::cout << stage_name(r.stage) << '\t' << (r.skipped ? "current" : "ran") << '\t'
              << r.artifact.content_hash.substr(0, 16);
    if (!r.artifact.failures.empty()) std::cout << '\t' << r.artifact.failures.size() << " failed requests";
    std::cout << '\n';
    std::size_t warnings = 0;
    for (const auto& d : r.diagnostics.entries()) {
        if (d.severity != Severity::Info) ++warnings;
    }
    if (warnings) std::cerr << stage_name(r.stage) << ": " << warnings << " warnings (see diagnostics.jsonl)\n";
}

RatingMatrix read_ratings(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty ratings file");
    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
    const std::size_t raters = split_delimited(line, delim).size();
    RatingMatrix m(raters);
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_delimited(line, delim);
        if (cells.size() != raters) throw DataError(path + ":" + std::to_string(n) + ": expected " + std::to_string(raters) + " columns");
        for (std::size_t r = 0; r < raters; ++r) {
            const std::string c = trim(cells[r]);
            if (c.empty() || c == "NA") {
                m[r].push_back(std::nullopt);
                continue;
            }
            try {
                m[r].push_back(std::stod(c));
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(n) + ": not a number: " + c);
            }
        }
    }
    return m;
}

// Mean over rater pairs, each on items both rated.
double mean_pairwise(const RatingMatrix& m, double (*metric)(const std::vector<double>&, const std::vector<double>&)) {
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < m.size(); ++a) {
        for (std::size_t b = a + 1; b < m.size(); ++b) {
            std::vector<double> x, y;
            for (std::size_t i = 0; i < m[a].size(); ++i) {
                if (m[a][i] && m[b][i]) {
                    x.push_back(*m[a][i]);
                    y.push_back(*m[b][i]);
                }
            }
            total += metric(x, y);
            ++pairs;
        }
    }
    if (pairs == 0) throw PreconditionError("need at least two raters");
    return total / static_cast<double>(pairs);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Task-level AI exposure pipeline"};
    app.require_subcommand(1);

    Flags flags;
    std::map<CLI::App*, Stage> stage_cmds;
    for (Stage s : kStages) {
        auto* cmd = app.add_subcommand(stage_name(s), "Run the " + stage_name(s) + " stage");
        add_stage_flags(cmd, flags);
        stage_cmds[cmd] = s;
    }
    auto* all = app.add_subcommand("all", "Run every stage that is not current");
    add_stage_flags(all, flags);
    auto* status = app.add_subcommand("status", "Show stage currency");
    status->add_option("--config", flags.config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);

    std::string ratings_path, metric = "all";
    auto* agreement = app.add_subcommand("agreement", "Agreement metrics over a rating table (items x raters)");
    agreement->add_option("--ratings", ratings_path, "CSV/TSV, header of rater names, empty cell = missing")
        ->required()
        ->check(CLI::ExistingFile);
    agreement->add_option("--metric", metric)->check(CLI::IsMember({"all", "spearman", "pearson", "krippendorff"}));

    std::string tasks_path, weighting = "equal";
    double score_delta = kDefaultDelta;
    std::string score_provider = "mock";
    std::string score_config;
    auto* score = app.add_subcommand("score-tasks", "Score an ordered external task list");
    score->add_option("--tasks", tasks_path, "One task per line, in list order")->required()->check(CLI::ExistingFile);
    score->add_option("--weighting", weighting)->check(CLI::IsMember({"equal", "decay"}));
    score->add_option("--delta", score_delta);
    score->add_option("--provider", score_provider)->check(CLI::IsMember({"mock", "remote"}));
    score->add_option("--config", score_config, "Pipeline config for provider settings")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        for (const auto& [cmd, s] : stage_cmds) {
            if (!cmd->parsed()) continue;
            Pipeline p(build_config(flags));
            print_result(p.run(s, flags.force));
            return kOk;
        }
        if (all->parsed()) {
            Pipeline p(build_config(flags));
            for (Stage s : stage_order()) print_result(p.run(s, flags.force));
            return kOk;
        }
        if (status->parsed()) {
            Pipeline p(build_config(flags));
            for (Stage s : stage_order()) {
                const StageStatus st = p.status(s);
                const char* name = st.state == StageStatus::State::Current ? "current"
                                   : st.state == StageStatus::State::Stale ? "stale"
                                                                           : "missing";
                std::cout << stage_name(s) << '\t' << name << '\t' << st.reason << '\n';
            }
            return kOk;
        }
        if (agreement->parsed()) {
            const RatingMatrix m = read_ratings(ratings_path);
            std::cout << std::setprecision(10);
            if (metric == "all" || metric == "spearman") std::cout << "spearman\t" << mean_pairwise(m, spearman) << '\n';
            if (metric == "all" || metric == "pearson") std::cout << "pearson\t" << mean_pairwise(m, pearson) << '\n';
            if (metric == "all" || metric == "krippendorff") std::cout << "krippendorff\t" << krippendorff_alpha(m) << '\n';
            return kOk;
        }
        if (score->parsed()) {
            ProviderConfig pc;
            if (!score_config.empty()) pc = PipelineConfig::load(score_config).provider;
            pc.kind = score_provider;
            auto provider = make_provider(pc);
            std::vector<std::string> tasks;
            std::istringstream in(read_file(tasks_path));
            std::string line;
            while (std::getline(in, line)) {
                line = trim(line);
                if (!line.empty()) tasks.push_back(line);
            }
            if (tasks.empty()) throw DataError(tasks_path + ": no tasks");
            const Weighting w = weighting == "equal" ? Weighting::equal_weights() : Weighting::decay(score_delta);
            const TaskListScore s = score_task_list(tasks, *provider, w);
            std::cout << "position\tscore\ttask\n";
            for (std::size_t i = 0; i < tasks.size(); ++i) std::cout << i + 1 << '\t' << s.scores[i] << '\t' << tasks[i] << '\n';
            std::cout << std::fixed << std::setprecision(6) << "mean\t" << s.mean << "\nstd\t" << s.std << '\n';
            return kOk;
        }
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const ProviderError& e) {
        std::cerr << "provider error: " << e.what() << '\n';
        return kProvider;
    } catch (const FixtureMissError& e) {
        std::cerr << "provider error: " << e.what() << '\n';
        return kProvider;
    } catch (const TransportError& e) {
        std::cerr << "provider error: " << e.what() << '\n';
        return kProvider;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}
