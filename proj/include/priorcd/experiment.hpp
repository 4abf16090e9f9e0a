#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <future>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "priorcd/benchmarks.hpp"
#include "priorcd/graph_io.hpp"
#include "priorcd/metrics.hpp"
#include "priorcd/notears.hpp"
#include "priorcd/priors.hpp"
#include "priorcd/scoring.hpp"
#include "priorcd/search_greedy.hpp"

namespace priorcd {

enum class Method { Greedy, Notears };

inline std::string to_string(Method m) { return m == Method::Greedy ? "greedy" : "notears"; }

struct ExperimentConfig {
    std::string dataset = "asia";
    std::optional<std::string> observations;  // CSV path; otherwise the bundled network is sampled
    std::optional<std::string> truth_path;    // graph JSON for custom observations
    Method method = Method::Greedy;
    std::vector<std::string> prior_paths;
    std::vector<double> lambdas{1.0};
    PenaltyKind penalty_kind = PenaltyKind::L1;
    Index sample_n = 5000;
    std::uint64_t seed = 0;
    std::string output_dir = "results";
    std::optional<Likelihood> likelihood;  // nullopt: multinomial iff every column is discrete
    bool skeleton_metrics = false;
    double threshold = 0.3;
    int max_iterations = 10000;
    int random_restarts = 0;
    double lambda_sparsity = 0.01;

    /// One enhanced run per sweep value; the baseline always runs in addition.
    const std::vector<double>& plan() const noexcept { return lambdas; }
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys{
        "dataset",   "observations", "truth_path",      "method",         "prior_paths",     "lambda",
        "penalty_kind", "sample_n",  "seed",            "output_dir",     "likelihood",      "skeleton_metrics",
        "threshold", "max_iterations", "random_restarts", "lambda_sparsity"};
    return keys;
}

inline std::vector<std::string> config_variables(const ExperimentConfig& c) {
    if (c.truth_path) return load_graph_json(*c.truth_path).variables;
    return load_ground_truth(c.dataset).variables;
}

}  // namespace detail

/**
 * Builds a config from a flat JSON object, collecting every problem (with
 * its field path) before failing. Cross-field checks load the prior files
 * and compare their variables against the dataset's.
 */
inline ExperimentConfig config_from_json(const nlohmann::json& doc) {
    std::vector<std::string> problems;
    ExperimentConfig c;
    if (!doc.is_object()) throw ConfigError({"$: config must be a JSON object"});

    for (const auto& [key, _] : doc.items()) {
        const auto& known = detail::known_config_keys();
        if (std::find(known.begin(), known.end(), key) == known.end()) problems.push_back("$." + key + ": unknown key");
    }

    auto get_string = [&](const char* key, auto&& assign) {
        if (!doc.contains(key)) return;
        if (!doc[key].is_string()) {
            problems.push_back(std::string("$.") + key + ": expected a string");
            return;
        }
        assign(doc[key].get<std::string>());
    };

    get_string("dataset", [&](std::string v) { c.dataset = std::move(v); });
    get_string("observations", [&](std::string v) { c.observations = std::move(v); });
    get_string("truth_path", [&](std::string v) { c.truth_path = std::move(v); });
    get_string("output_dir", [&](std::string v) {
        if (v.empty()) problems.push_back("$.output_dir: must be nonempty");
        c.output_dir = std::move(v);
    });
    bool penalty_given = false;
    get_string("method", [&](std::string v) {
        v = detail::lower(v);
        if (v == "greedy" || v == "ges")
            c.method = Method::Greedy;
        else if (v == "notears")
            c.method = Method::Notears;
        else
            problems.push_back("$.method: expected \"greedy\" or \"notears\", got \"" + v + "\"");
    });
    get_string("penalty_kind", [&](std::string v) {
        penalty_given = true;
        v = detail::lower(v);
        if (v == "l1")
            c.penalty_kind = PenaltyKind::L1;
        else if (v == "l2")
            c.penalty_kind = PenaltyKind::L2;
        else if (v == "none")
            c.penalty_kind = PenaltyKind::None;
        else
            problems.push_back("$.penalty_kind: expected \"l1\", \"l2\" or \"none\"");
    });
    get_string("likelihood", [&](std::string v) {
        v = detail::lower(v);
        if (v == "gaussian")
            c.likelihood = Likelihood::GaussianLinear;
        else if (v == "multinomial" || v == "discrete")
            c.likelihood = Likelihood::DiscreteMultinomial;
        else if (v != "auto")
            problems.push_back("$.likelihood: expected \"gaussian\", \"multinomial\" or \"auto\"");
    });
    if (!penalty_given && c.method == Method::Notears) c.penalty_kind = PenaltyKind::L2;
    if (c.method == Method::Notears && c.penalty_kind == PenaltyKind::L1)
        problems.push_back("$.penalty_kind: NOTEARS supports l2 only");

    if (doc.contains("lambda")) {
        const auto& l = doc["lambda"];
        std::vector<double> values;
        if (l.is_number()) {
            values.push_back(l.get<double>());
        } else if (l.is_array()) {
            if (l.empty()) problems.push_back("$.lambda: sweep list must be nonempty");
            for (Index k = 0; k < l.size(); ++k) {
                if (!l[k].is_number()) {
                    problems.push_back("$.lambda[" + std::to_string(k) + "]: expected a number");
                    continue;
                }
                values.push_back(l[k].get<double>());
            }
        } else {
            problems.push_back("$.lambda: expected a number or a list of numbers");
        }
        for (Index k = 0; k < values.size(); ++k)
            if (!(values[k] >= 0) || !std::isfinite(values[k]))
                problems.push_back("$.lambda: value " + std::to_string(values[k]) + " must be finite and >= 0");
        if (!values.empty()) c.lambdas = std::move(values);
    }

    auto get_int = [&](const char* key, long long min, auto&& assign) {
        if (!doc.contains(key)) return;
        if (!doc[key].is_number_integer()) {
            problems.push_back(std::string("$.") + key + ": expected an integer");
            return;
        }
        const auto v = doc[key].get<long long>();
        if (v < min) {
            problems.push_back(std::string("$.") + key + ": must be >= " + std::to_string(min));
            return;
        }
        assign(v);
    };
    get_int("sample_n", 1, [&](long long v) { c.sample_n = static_cast<Index>(v); });
    get_int("seed", 0, [&](long long v) { c.seed = static_cast<std::uint64_t>(v); });
    get_int("max_iterations", 1, [&](long long v) { c.max_iterations = static_cast<int>(v); });
    get_int("random_restarts", 0, [&](long long v) { c.random_restarts = static_cast<int>(v); });

    auto get_nonneg = [&](const char* key, double& target) {
        if (!doc.contains(key)) return;
        if (!doc[key].is_number() || !(doc[key].get<double>() >= 0)) {
            problems.push_back(std::string("$.") + key + ": expected a nonnegative number");
            return;
        }
        target = doc[key].get<double>();
    };
    get_nonneg("threshold", c.threshold);
    get_nonneg("lambda_sparsity", c.lambda_sparsity);

    if (doc.contains("skeleton_metrics")) {
        if (!doc["skeleton_metrics"].is_boolean())
            problems.push_back("$.skeleton_metrics: expected a boolean");
        else
            c.skeleton_metrics = doc["skeleton_metrics"].get<bool>();
    }
    if (doc.contains("prior_paths")) {
        if (!doc["prior_paths"].is_array()) {
            problems.push_back("$.prior_paths: expected a list of file paths");
        } else {
            for (Index k = 0; k < doc["prior_paths"].size(); ++k) {
                const auto& p = doc["prior_paths"][k];
                if (!p.is_string())
                    problems.push_back("$.prior_paths[" + std::to_string(k) + "]: expected a string");
                else
                    c.prior_paths.push_back(p.get<std::string>());
            }
        }
    }

    // dataset / truth
    std::optional<std::vector<std::string>> variables;
    if (c.observations && !std::filesystem::exists(*c.observations))
        problems.push_back("$.observations: file '" + *c.observations + "' does not exist");
    if (c.truth_path && !std::filesystem::exists(*c.truth_path))
        problems.push_back("$.truth_path: file '" + *c.truth_path + "' does not exist");
    try {
        if (!c.observations) {
            const auto names = bundled_network_names();
            if (std::find(names.begin(), names.end(), c.dataset) == names.end())
                problems.push_back("$.dataset: '" + c.dataset + "' is not a bundled network; supply observations");
            else
                variables = detail::config_variables(c);
        } else if (!c.truth_path || std::filesystem::exists(*c.truth_path)) {
            variables = detail::config_variables(c);
        }
    } catch (const std::exception& e) {
        problems.push_back("$.dataset: " + std::string(e.what()));
    }

    for (Index k = 0; k < c.prior_paths.size(); ++k) {
        const std::string field = "$.prior_paths[" + std::to_string(k) + "]";
        try {
            const auto prior = load_prior_file(c.prior_paths[k]);
            if (variables) prior.aligned_to(*variables);
        } catch (const std::exception& e) {
            problems.push_back(field + ": " + e.what());
        }
    }
    if (std::filesystem::exists(c.output_dir) && !std::filesystem::is_directory(c.output_dir))
        problems.push_back("$.output_dir: '" + c.output_dir + "' exists and is not a directory");

    if (!problems.empty()) throw ConfigError(std::move(problems));
    return c;
}

inline ExperimentConfig validate_config(const std::string& path) {
    if (!std::filesystem::exists(path)) throw ConfigError({"$: config file '" + path + "' does not exist"});
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError({"$: malformed JSON: " + std::string(e.what())});
    }
    return config_from_json(doc);
}

// ---------------------------------------------------------------------------
// Running

struct RunRecord {
    std::string variant;  // "baseline" or "enhanced"
    double lambda = 0.0;
    SearchResult search;
    EvalReport report;
};

struct ExperimentOutcome {
    RunRecord baseline;
    std::vector<RunRecord> enhanced;  // one per sweep value, in plan order
    std::optional<WeightedPriors> priors;
    std::vector<std::string> variables;
    std::string output_dir;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_lambda(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

struct LoadedData {
    Dataset data;
    GroundTruth truth;
};

inline LoadedData load_experiment_data(const ExperimentConfig& c) {
    if (c.observations) {
        GroundTruth truth;
        std::vector<VariableMeta> declared;
        if (c.truth_path) {
            auto g = load_graph_json(*c.truth_path);
            truth = {c.dataset, std::move(g.adjacency), std::move(g.variables)};
        } else {
            truth = load_ground_truth(c.dataset);
            const auto names = bundled_network_names();
            if (std::find(names.begin(), names.end(), c.dataset) != names.end())
                declared = load_network(c.dataset).variables;
        }
        auto data = load_observations(*c.observations, truth, declared);
        return {std::move(data), std::move(truth)};
    }
    const auto net = load_network(c.dataset);
    return {forward_sample(net, c.sample_n, c.seed), ground_truth(net)};
}

inline SearchResult run_method(const ExperimentConfig& c, const Dataset& data, Likelihood likelihood,
                               const PriorEnsemble* ensemble, double lambda) {
    if (c.method == Method::Greedy) {
        ScoreConfig sc{lambda, ensemble ? c.penalty_kind : PenaltyKind::None, likelihood};
        SearchConfig search;
        search.max_iterations = c.max_iterations;
        search.random_restarts = c.random_restarts;
        search.seed = c.seed;
        return greedy_search(data, ensemble, sc, search);
    }
    notears::NotearsConfig nc;
    nc.lambda_prior = ensemble && c.penalty_kind != PenaltyKind::None ? lambda : 0.0;
    nc.lambda_sparsity = c.lambda_sparsity;
    nc.threshold_tau = c.threshold;
    return notears::solve(data, ensemble, nc);
}

inline std::string timestamp_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

inline std::string results_row(const ExperimentConfig& c, const RunRecord& r) {
    std::ostringstream s;
    s << to_string(c.method) << ',' << r.variant << ',' << (r.variant == "baseline" ? "" : format_lambda(r.lambda))
      << ',' << (r.variant == "baseline" ? "none" : to_string(c.penalty_kind)) << ',' << eval_csv_row(r.report) << ','
      << r.search.adjacency.edge_count() << ',' << format_double(r.search.final_score);
    return s.str();
}

inline std::string report_markdown(const ExperimentConfig& c, const ExperimentOutcome& o) {
    std::ostringstream s;
    s << "# " << c.dataset << " / " << to_string(c.method) << "\n\n";
    s << "| Metric | Baseline |";
    for (const auto& e : o.enhanced) s << " Enhanced (lambda=" << format_lambda(e.lambda) << ") | Delta |";
    s << "\n|---|---|";
    for (std::size_t k = 0; k < o.enhanced.size(); ++k) s << "---|---|";
    s << '\n';
    auto fmt = [](double v) {
        std::ostringstream f;
        f << std::fixed << std::setprecision(3) << v;
        return f.str();
    };
    auto row = [&](const char* name, auto get) {
        s << "| " << name << " | " << fmt(get(o.baseline.report)) << " |";
        for (const auto& e : o.enhanced)
            s << ' ' << fmt(get(e.report)) << " | " << fmt(get(e.report) - get(o.baseline.report)) << " |";
        s << '\n';
    };
    row("SHD", [](const EvalReport& r) { return static_cast<double>(r.shd); });
    row("TPR", [](const EvalReport& r) { return r.tpr; });
    row("FDR", [](const EvalReport& r) { return r.fdr; });
    if (o.priors) {
        s << "\nPrior weights:\n\n";
        for (Index k = 0; k < o.priors->ensemble.size(); ++k)
            s << "- " << o.priors->ensemble.prior(k).source << ": " << fmt(o.priors->ensemble.weight(k)) << '\n';
    }
    return s.str();
}

}  // namespace detail

/**
 * Loads data and priors, weights the priors, runs the baseline and one
 * enhanced run per sweep value, evaluates each against the ground truth and
 * writes results.csv, weights.json, estimated_*.json and report.md.
 * On failure a FAILED marker holding the diagnosis is left in output_dir.
 */
inline ExperimentOutcome run_experiment(const ExperimentConfig& c) {
    namespace fs = std::filesystem;
    const fs::path out_dir(c.output_dir);
    fs::create_directories(out_dir);
    fs::remove(out_dir / "FAILED");
    try {
        auto [data, truth] = detail::load_experiment_data(c);
        const Likelihood likelihood =
            c.likelihood.value_or(data.all_discrete() ? Likelihood::DiscreteMultinomial : Likelihood::GaussianLinear);
        if (c.method == Method::Notears && c.penalty_kind == PenaltyKind::L1)
            throw ContractViolation("NOTEARS supports l2 only");

        ExperimentOutcome o;
        o.variables = data.names();
        o.output_dir = c.output_dir;

        if (!c.prior_paths.empty()) {
            std::vector<PriorGraph> priors;
            for (const auto& p : c.prior_paths) priors.push_back(load_prior_file(p).aligned_to(o.variables));
            BicScorer scorer(data, likelihood);
            o.priors = compute_weights_detailed(std::move(priors), local_score_fn(scorer));
            nlohmann::json w = nlohmann::json::array();
            for (Index k = 0; k < o.priors->ensemble.size(); ++k)
                w.push_back({{"source", o.priors->ensemble.prior(k).source},
                             {"path", c.prior_paths[k]},
                             {"score", o.priors->scores[k]},
                             {"weight", o.priors->ensemble.weight(k)}});
            write_text_file((out_dir / "weights.json").string(), w.dump(2) + "\n");
        }

        o.baseline.variant = "baseline";
        o.baseline.search = detail::run_method(c, data, likelihood, nullptr, 0.0);
        o.baseline.report = evaluate(o.baseline.search.adjacency, truth, c.skeleton_metrics);

        if (o.priors) {
            const PriorEnsemble* ensemble = &o.priors->ensemble;
            std::vector<std::future<RunRecord>> jobs;
            for (Index k = 0; k < c.plan().size(); ++k) {
                jobs.push_back(std::async(std::launch::async, [&, k] {
                    RunRecord r;
                    r.variant = "enhanced";
                    r.lambda = c.plan()[k];
                    r.search = detail::run_method(c, data, likelihood, ensemble, r.lambda);
                    r.report = evaluate(r.search.adjacency, truth, c.skeleton_metrics);
                    const fs::path dir = out_dir / "runs" / ("lambda_" + std::to_string(k));
                    fs::create_directories(dir);
                    write_text_file((dir / "estimated.json").string(), to_json(r.search, o.variables).dump(2) + "\n");
                    if (c.method == Method::Notears)
                        write_text_file((dir / "trace.csv").string(), notears::trace_csv(r.search));
                    return r;
                }));
            }
            for (auto& j : jobs) o.enhanced.push_back(j.get());
        }

        // single-threaded merge
        write_text_file((out_dir / "estimated_baseline.json").string(),
                        to_json(o.baseline.search, o.variables).dump(2) + "\n");
        if (c.method == Method::Notears)
            write_text_file((out_dir / "trace_baseline.csv").string(), notears::trace_csv(o.baseline.search));
        for (Index k = 0; k < o.enhanced.size(); ++k)
            write_text_file((out_dir / ("estimated_lambda_" + std::to_string(k) + ".json")).string(),
                            to_json(o.enhanced[k].search, o.variables).dump(2) + "\n");

        std::ostringstream csv;
        csv << "# generated: " << detail::timestamp_now() << '\n';
        csv << "method,variant,lambda,penalty," << eval_csv_header() << ",edges,final_score\n";
        csv << detail::results_row(c, o.baseline) << '\n';
        for (const auto& e : o.enhanced) csv << detail::results_row(c, e) << '\n';
        write_text_file((out_dir / "results.csv").string(), csv.str());
        write_text_file((out_dir / "report.md").string(), detail::report_markdown(c, o));
        return o;
    } catch (const std::exception& e) {
        write_text_file((out_dir / "FAILED").string(), std::string(e.what()) + "\n");
        throw;
    }
}

}  // namespace priorcd
