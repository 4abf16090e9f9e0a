#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "priorcd/benchmarks.hpp"
#include "priorcd/experiment.hpp"
#include "priorcd/http_backend.hpp"
#include "priorcd/metrics.hpp"
#include "priorcd/query.hpp"

using namespace priorcd;
using nlohmann::json;

namespace {

struct RunFlags {
    std::string config;
    std::optional<std::string> dataset, observations, truth, method, penalty, likelihood, output_dir;
    std::vector<std::string> priors;
    std::vector<double> lambdas;
    std::optional<long long> sample_n, seed, max_iterations, restarts;
    std::optional<double> threshold, lambda_sparsity;
    bool skeleton = false;
    bool check_only = false;
};

json merged_config(const RunFlags& f) {
    json doc = json::object();
    if (!f.config.empty()) {
        if (!std::filesystem::exists(f.config)) throw ConfigError({"$: config file '" + f.config + "' does not exist"});
        try {
            doc = json::parse(read_text_file(f.config));
        } catch (const json::parse_error& e) {
            throw ConfigError({"$: malformed JSON in " + f.config + ": " + e.what()});
        }
        if (!doc.is_object()) throw ConfigError({"$: config must be a JSON object"});
    }
    auto set = [&](const char* key, const auto& v) {
        if (v) doc[key] = *v;
    };
    set("dataset", f.dataset);
    set("observations", f.observations);
    set("truth_path", f.truth);
    set("method", f.method);
    set("penalty_kind", f.penalty);
    set("likelihood", f.likelihood);
    set("output_dir", f.output_dir);
    set("sample_n", f.sample_n);
    set("seed", f.seed);
    set("max_iterations", f.max_iterations);
    set("random_restarts", f.restarts);
    set("threshold", f.threshold);
    set("lambda_sparsity", f.lambda_sparsity);
    if (!f.priors.empty()) doc["prior_paths"] = f.priors;
    if (!f.lambdas.empty()) doc["lambda"] = f.lambdas;
    if (f.skeleton) doc["skeleton_metrics"] = true;
    return doc;
}

int cmd_run(const RunFlags& f) {
    const auto config = config_from_json(merged_config(f));
    if (f.check_only) {
        std::cout << "config ok: " << to_string(config.method) << " on " << config.dataset << ", "
                  << config.plan().size() << " sweep point(s)\n";
        return 0;
    }
    const auto outcome = run_experiment(config);
    std::cout << read_text_file((std::filesystem::path(outcome.output_dir) / "report.md").string());
    return 0;
}

int cmd_sample(const std::string& network, long long n, long long seed, const std::string& output, bool list) {
    if (list) {
        for (const auto& name : bundled_network_names()) std::cout << name << '\n';
        return 0;
    }
    if (n < 1) throw ContractViolation("--n must be >= 1");
    const auto data = forward_sample(load_network(network), static_cast<Index>(n), static_cast<std::uint64_t>(seed));
    const auto csv = observations_to_csv(data);
    if (output.empty() || output == "-")
        std::cout << csv;
    else
        write_text_file(output, csv);
    return 0;
}

std::vector<VariableMeta> query_variables(const std::string& network, const std::string& data_path) {
    if (!data_path.empty()) return load_observations(data_path).variables();
    const auto names = bundled_network_names();
    if (std::find(names.begin(), names.end(), network) != names.end()) return load_network(network).variables;
    std::vector<VariableMeta> vars;
    for (const auto& name : load_ground_truth(network).variables) vars.push_back(VariableMeta::continuous(name));
    return vars;
}

int cmd_query(const std::string& model, const std::string& fixtures, const std::string& network,
              const std::string& data_path, const std::string& output, const std::string& transcript_path,
              int attempts) {
    const auto variables = query_variables(network, data_path);
    std::unique_ptr<ChatBackend> backend;
    if (!fixtures.empty())
        backend = std::make_unique<FixtureBackend>(fixtures, model);
    else
        backend = HttpChatBackend::from_environment(model);
    const auto outcome = run_query_pipeline(*backend, variables, attempts);
    for (const auto& w : outcome.transcripts.back().warnings) std::cerr << "warning: " << w << '\n';
    const auto doc = prior_to_json(outcome.prior).dump(2) + "\n";
    if (output.empty() || output == "-")
        std::cout << doc;
    else
        write_text_file(output, doc);
    if (!transcript_path.empty()) {
        json t = json::array();
        for (const auto& tr : outcome.transcripts) t.push_back(to_json(tr));
        write_text_file(transcript_path, t.dump(2) + "\n");
    }
    return 0;
}

int cmd_eval(const std::string& estimated, const std::string& truth, bool skeleton, const std::string& format) {
    GroundTruth gt;
    if (std::filesystem::exists(truth)) {
        auto g = load_graph_json(truth);
        gt = {truth, std::move(g.adjacency), std::move(g.variables)};
    } else {
        gt = load_ground_truth(truth);
    }
    const auto est = align_graph(load_graph_json(estimated), gt.variables, estimated);
    const auto report = evaluate(est, gt, skeleton);
    if (format == "csv")
        std::cout << eval_csv_header() << '\n' << eval_csv_row(report) << '\n';
    else
        std::cout << to_json(report).dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prior-augmented causal structure learning"};
    app.require_subcommand(1);
    app.footer("Environment: PRIOR_LLM_ENDPOINT, PRIOR_LLM_TOKEN (live query mode)");

    RunFlags rf;
    auto* run = app.add_subcommand("run", "Run baseline and prior-enhanced discovery, evaluate, write results");
    run->add_option("-c,--config", rf.config, "JSON config file (flags override its keys)");
    run->add_option("--dataset", rf.dataset, "Bundled network name (asia, child, earthquake, lucas; sachs with --observations)");
    run->add_option("--observations", rf.observations, "Observation CSV instead of sampling");
    run->add_option("--truth", rf.truth, "Ground-truth graph JSON for custom observations");
    run->add_option("--method", rf.method, "greedy | notears");
    run->add_option("--prior", rf.priors, "Prior graph JSON (repeatable)");
    run->add_option("--lambda", rf.lambdas, "Penalty strength; repeat for a sweep");
    run->add_option("--penalty", rf.penalty, "l1 | l2 | none (default l1 for greedy, l2 for notears)");
    run->add_option("--likelihood", rf.likelihood, "gaussian | multinomial | auto");
    run->add_option("--sample-n", rf.sample_n, "Rows sampled from the bundled network (default 5000)");
    run->add_option("--seed", rf.seed, "Sampling and restart seed (default 0)");
    run->add_option("--max-iterations", rf.max_iterations, "Greedy move limit (default 10000)");
    run->add_option("--restarts", rf.restarts, "Greedy random restarts (default 0)");
    run->add_option("--threshold", rf.threshold, "NOTEARS edge threshold (default 0.3)");
    run->add_option("--lambda-sparsity", rf.lambda_sparsity, "NOTEARS l1 coefficient (default 0.01)");
    run->add_option("-o,--output-dir", rf.output_dir, "Artifact directory (default results)");
    run->add_flag("--skeleton-metrics", rf.skeleton, "Score TPR/FDR on the undirected skeleton");
    run->add_flag("--check", rf.check_only, "Validate the configuration and exit");

    std::string network = "asia", output;
    long long n = 5000, seed = 0;
    bool list = false;
    auto* sample = app.add_subcommand("sample", "Forward-sample a bundled network to CSV");
    sample->add_option("--network", network, "Bundled network name")->capture_default_str();
    sample->add_option("-n,--n", n, "Number of rows")->capture_default_str();
    sample->add_option("--seed", seed, "Random seed")->capture_default_str();
    sample->add_option("-o,--output", output, "Output CSV (stdout when omitted)");
    sample->add_flag("--list", list, "List bundled networks");

    std::string model, fixtures, qnetwork = "asia", data_path, qoutput, transcript;
    int attempts = 3;
    auto* query = app.add_subcommand("query", "Three-stage prior elicitation to a prior JSON file");
    query->add_option("--model", model, "Model identifier (also the fixture subdirectory)")->required();
    query->add_option("--fixtures", fixtures, "Replay <dir>/<model>/{understanding,discovery,revision}.txt");
    query->add_option("--network", qnetwork, "Take variables from a bundled network or ground truth")->capture_default_str();
    query->add_option("--data", data_path, "Take variables from an observation CSV");
    query->add_option("-o,--output", qoutput, "Prior JSON (stdout when omitted)");
    query->add_option("--transcript", transcript, "Write the stage transcripts as JSON");
    query->add_option("--attempts", attempts, "Attempts per stage on transport errors")->capture_default_str();

    std::string estimated, truth, format = "json";
    bool skeleton = false;
    auto* eval = app.add_subcommand("eval", "SHD/TPR/FDR of a graph against a ground truth");
    eval->add_option("--estimated", estimated, "Estimated graph JSON")->required();
    eval->add_option("--truth", truth, "Bundled network name or graph JSON")->required();
    eval->add_flag("--skeleton-metrics", skeleton, "Score TPR/FDR on the undirected skeleton");
    eval->add_option("--format", format, "json | csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(rf);
        if (*sample) return cmd_sample(network, n, seed, output, list);
        if (*query) return cmd_query(model, fixtures, qnetwork, data_path, qoutput, transcript, attempts);
        if (*eval) return cmd_eval(estimated, truth, skeleton, format);
    } catch (const ConfigError& e) {
        std::string joined;
        for (const auto& p : e.problems()) joined += (joined.empty() ? "" : "; ") + p;
        std::cerr << "error: invalid config: " << joined << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << '\n';
        return 1;
    }
    return 0;
}
