#include "taskexposure/agreement.hpp"
#include "taskexposure/clustering.hpp"
#include "taskexposure/exposure.hpp"
#include "taskexposure/pipeline.hpp"
#include "taskexposure/savings.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace taskexposure;

namespace {

DecayWeights weights_for(std::size_t T, std::optional<double> delta) {
    return delta ? DecayWeights::decay(T, *delta) : DecayWeights::equal(T);
}

std::vector<TaskRecord> records(const std::vector<double>& scores) {
    std::vector<TaskRecord> out;
    for (std::size_t i = 0; i < scores.size(); ++i) out.push_back(make_task(static_cast<int>(i + 1), "", scores[i]));
    return out;
}

py::dict savings_dict(const RoleSavings& s) {
    py::dict d;
    d["H"] = s.H;
    d["class"] = savings_class_name(s.cls);
    d["C"] = s.C;
    d["P"] = s.P;
    d["P_upper"] = s.P_upper;
    d["freed_hours"] = s.freed_hours;
    return d;
}

PipelineConfig config_at(const std::string& path, std::optional<std::string> output_dir) {
    PipelineConfig c = PipelineConfig::load(path);
    if (output_dir) c.output_dir = *output_dir;
    return c;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Task-level AI exposure core";

    auto precondition = py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    auto data = py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<ProviderError>(m, "ProviderError", PyExc_RuntimeError);
    (void)precondition;
    (void)data;

    m.def("decay_weights", [](std::size_t T, double delta) { return DecayWeights::decay(T, delta).normalized(); },
          py::arg("T"), py::arg("delta") = kDefaultDelta);

    m.def("classify_exposure", [](double e) {
        const auto c = classify_exposure(e);
        return py::make_tuple(band_name(c.band), c.h);
    });

    m.def(
        "role_exposure",
        [](const std::vector<double>& scores, std::optional<double> delta, std::optional<double> salary) {
            const RoleExposure r = role_exposure(records(scores), weights_for(scores.size(), delta), salary);
            py::dict d;
            d["E"] = r.E;
            d["sigma"] = r.sigma;
            d["H"] = r.H;
            d["M"] = r.M;
            d["hours"] = r.hours_per_task;
            d["value"] = r.value_per_task;
            return d;
        },
        py::arg("scores"), py::arg("delta") = kDefaultDelta, py::arg("salary") = py::none(),
        "delta=None uses equal weights");

    m.def("classify_role", [](double H, double theta) { return savings_class_name(classify_role(H, theta)); });

    m.def(
        "role_savings",
        [](double H, double M, std::optional<double> salary, double theta) {
            return savings_dict(role_savings({"role", H, M, salary}, theta));
        },
        py::arg("H"), py::arg("M"), py::arg("salary"), py::arg("theta") = 0.8);

    m.def(
        "sweep",
        [](const std::vector<std::tuple<double, double, double>>& roles, const std::vector<double>& weights,
           std::optional<std::vector<double>> grid) {
            std::vector<SavingsInput> in;
            for (const auto& [H, M, S] : roles) in.push_back({"role" + std::to_string(in.size()), H, M, S});
            const SweepCurve curve = sweep(in, weights, grid ? *grid : default_theta_grid());
            py::list out;
            for (const auto& p : curve.points) {
                py::dict d;
                d["theta"] = p.theta;
                d["C"] = p.C;
                d["P"] = p.P;
                d["P_upper"] = p.P_upper;
                d["ratio"] = p.ratio;
                d["n_cost"] = p.n_cost;
                d["n_prod"] = p.n_prod;
                d["n_noimpact"] = p.n_noimpact;
                out.append(d);
            }
            return out;
        },
        py::arg("roles"), py::arg("weights"), py::arg("grid") = py::none(), "roles: (H, M, salary) tuples");

    m.def(
        "kmeans",
        [](const std::vector<Point>& points, std::size_t k, std::uint64_t seed) {
            const KMeansResult r = kmeans(points, k, seed);
            return py::make_tuple(r.assignments, r.centroids, r.inertia);
        },
        py::arg("points"), py::arg("k"), py::arg("seed") = 42);

    m.def(
        "cluster_roles",
        [](const std::vector<std::pair<double, double>>& roles, std::uint64_t seed) {
            const RoleClustering rc = cluster_roles(roles, seed);
            std::vector<std::string> names;
            for (auto c : rc.labels) names.push_back(exposure_cluster_name(c));
            return names;
        },
        py::arg("roles"), py::arg("seed") = 42);

    m.def("pearson", &pearson);
    m.def("spearman", &spearman);
    m.def("krippendorff_alpha", &krippendorff_alpha, "ratings[rater][item], None for missing");

    m.def(
        "run_pipeline",
        [](const std::string& config, std::optional<std::string> output_dir, bool force) {
            Pipeline p(config_at(config, output_dir));
            py::list out;
            for (const auto& r : p.run_all(force)) {
                out.append(py::make_tuple(stage_name(r.stage), r.skipped, r.artifact.content_hash));
            }
            return out;
        },
        py::arg("config"), py::arg("output_dir") = py::none(), py::arg("force") = false);

    m.def(
        "stage_status",
        [](const std::string& config, std::optional<std::string> output_dir) {
            Pipeline p(config_at(config, output_dir));
            py::dict out;
            for (Stage s : stage_order()) {
                const auto st = p.status(s);
                out[py::str(stage_name(s))] = st.state == StageStatus::State::Current ? "current"
                                              : st.state == StageStatus::State::Stale ? "stale"
                                                                                      : "missing";
            }
            return out;
        },
        py::arg("config"), py::arg("output_dir") = py::none());
}
