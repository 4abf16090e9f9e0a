#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "priorcd/core.hpp"
#include "priorcd/graph_io.hpp"
#include "priorcd/priors.hpp"

namespace priorcd {

enum class QueryStage { Understanding, CausalDiscovery, Revision };

inline constexpr QueryStage kPipelineStages[] = {QueryStage::Understanding, QueryStage::CausalDiscovery,
                                                 QueryStage::Revision};

/// File stem used by fixture directories: <model>/<stem>.txt
inline std::string stage_stem(QueryStage s) {
    switch (s) {
        case QueryStage::Understanding: return "understanding";
        case QueryStage::CausalDiscovery: return "discovery";
        case QueryStage::Revision: return "revision";
    }
    return "?";
}

struct ChatMessage {
    std::string role;  // "user" or "assistant"
    std::string content;
};

struct QueryTranscript {
    QueryStage stage;
    std::string prompt_text;
    std::string response_text;
    std::chrono::system_clock::time_point timestamp;
    std::vector<std::string> warnings;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string model() const = 0;
    /// Reply to the last user message of `conversation`.
    virtual std::string complete(const std::vector<ChatMessage>& conversation, QueryStage stage) = 0;
};

/// Replays recorded responses from <root>/<model>/<stage>.txt verbatim.
class FixtureBackend final : public ChatBackend {
public:
    FixtureBackend(std::filesystem::path root, std::string model) : root_(std::move(root)), model_(std::move(model)) {}

    std::string model() const override { return model_; }

    std::string complete(const std::vector<ChatMessage>&, QueryStage stage) override {
        const auto path = root_ / model_ / (stage_stem(stage) + ".txt");
        if (!std::filesystem::exists(path)) throw Error("missing fixture file '" + path.string() + "'");
        return read_text_file(path.string());
    }

private:
    std::filesystem::path root_;
    std::string model_;
};

// ---------------------------------------------------------------------------
// Prompts

inline std::string understanding_prompt(const std::vector<VariableMeta>& variables) {
    std::ostringstream p;
    p << "We are studying a dataset and want to understand its variables before reasoning about causality.\n"
      << "Each variable is listed with its name and its possible values:\n";
    for (const auto& v : variables) {
        p << "- " << v.name << ": ";
        if (v.is_discrete()) {
            for (Index k = 0; k < v.categories.size(); ++k) p << (k ? ", " : "") << v.categories[k];
        } else {
            p << "continuous numeric measurement";
        }
        p << '\n';
    }
    p << "Briefly explain what each variable most likely represents in this domain.";
    return p.str();
}

inline std::string discovery_prompt() {
    return "Using your understanding of these variables, list every direct cause-and-effect relationship between them.\n"
           "Write exactly one relationship per line in the form `<cause> -> <effect>`, using the variable names "
           "exactly as given. Do not write anything else.";
}

inline std::string revision_prompt() {
    return "Review the relationships you just listed and identify potential inaccuracies: reversed directions, "
           "indirect effects stated as direct, or relationships that are not supported.\n"
           "Then output only the corrected final list, one relationship per line in the form `<cause> -> <effect>`.";
}

struct QueryOutcome {
    PriorGraph prior;
    std::vector<QueryTranscript> transcripts;
};

/**
 * Understanding, causal discovery and revision prompts issued in sequence on
 * one conversation; the revision reply is parsed into the prior graph.
 */
inline QueryOutcome run_query_pipeline(ChatBackend& backend, const std::vector<VariableMeta>& variables,
                                       int max_attempts = 1) {
    if (variables.empty()) throw ContractViolation("query pipeline needs at least one variable");
    validate_variables(variables);

    std::vector<ChatMessage> conversation;
    QueryOutcome out;
    for (QueryStage stage : kPipelineStages) {
        const std::string prompt = stage == QueryStage::Understanding     ? understanding_prompt(variables)
                                   : stage == QueryStage::CausalDiscovery ? discovery_prompt()
                                                                          : revision_prompt();
        conversation.push_back({"user", prompt});
        std::string reply;
        for (int attempt = 1;; ++attempt) {
            try {
                reply = backend.complete(conversation, stage);
                break;
            } catch (const TransportError&) {
                if (attempt >= max_attempts) throw;
            }
        }
        conversation.push_back({"assistant", reply});
        out.transcripts.push_back({stage, prompt, reply, std::chrono::system_clock::now(), {}});
    }

    auto& final_stage = out.transcripts.back();
    const auto parsed = parse_statements(final_stage.response_text, variables);
    if (parsed.edges.empty() && parsed.warnings.empty() && !parsed.skipped_lines.empty())
        throw ParseError("final response from '" + backend.model() + "' contains no `<cause> -> <effect>` lines",
                         final_stage.response_text);
    final_stage.warnings = parsed.warnings;
    for (const auto& line : parsed.skipped_lines) final_stage.warnings.push_back("skipped line: " + line);

    std::vector<std::string> names;
    for (const auto& v : variables) names.push_back(v.name);
    out.prior = PriorGraph(backend.model(), names, AdjacencyMatrix::from_edges(variables.size(), parsed.edges),
                           parsed.statements);
    return out;
}

inline nlohmann::json to_json(const QueryTranscript& t) {
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(t.timestamp.time_since_epoch()).count();
    return {{"stage", stage_stem(t.stage)},
            {"prompt", t.prompt_text},
            {"response", t.response_text},
            {"timestamp", secs},
            {"warnings", t.warnings}};
}

}  // namespace priorcd
