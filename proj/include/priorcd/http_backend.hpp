#pragma once

#include <cstdlib>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "httplib.h"
// <resolv.h> defines _res, which collides with Eigen internals
#ifdef _res
#undef _res
#endif
#include "json.hpp"

#include "priorcd/query.hpp"

namespace priorcd {

inline constexpr const char* kEndpointEnv = "PRIOR_LLM_ENDPOINT";
inline constexpr const char* kTokenEnv = "PRIOR_LLM_TOKEN";

/**
 * Minimal chat-completion client.
 *
 * Request:  POST <endpoint>  {"model": str, "messages": [{"role", "content"}, ...]}
 * Response: JSON with a "text" field (an OpenAI-style choices[0].message.content is also accepted).
 */
class HttpChatBackend final : public ChatBackend {
public:
    HttpChatBackend(std::string endpoint, std::string token, std::string model, int timeout_seconds = 120)
        : token_(std::move(token)), model_(std::move(model)), timeout_(timeout_seconds) {
        const auto scheme_end = endpoint.find("://");
        if (scheme_end == std::string::npos) throw ContractViolation("endpoint must be an http(s) URL: " + endpoint);
        const auto path_start = endpoint.find('/', scheme_end + 3);
        base_ = endpoint.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
    }

    /// Reads PRIOR_LLM_ENDPOINT / PRIOR_LLM_TOKEN.
    static std::unique_ptr<HttpChatBackend> from_environment(std::string model) {
        const char* url = std::getenv(kEndpointEnv);
        if (url == nullptr || *url == '\0') throw ContractViolation(std::string(kEndpointEnv) + " is not set");
        const char* token = std::getenv(kTokenEnv);
        return std::make_unique<HttpChatBackend>(url, token ? token : "", std::move(model));
    }

    std::string model() const override { return model_; }

    std::string complete(const std::vector<ChatMessage>& conversation, QueryStage) override {
        nlohmann::json body{{"model", model_}, {"messages", nlohmann::json::array()}};
        for (const auto& m : conversation) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

        httplib::Client client(base_);
        if (!client.is_valid()) throw TransportError("unsupported endpoint '" + base_ + "'");
        client.set_connection_timeout(timeout_, 0);
        client.set_read_timeout(timeout_, 0);
        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) throw TransportError("request to " + base_ + path_ + " failed: " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300)
            throw TransportError("endpoint returned HTTP " + std::to_string(res->status));

        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error&) {
            throw ParseError("endpoint response is not JSON", res->body);
        }
        if (reply.contains("text") && reply["text"].is_string()) return reply["text"].get<std::string>();
        if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
            const auto& c = reply["choices"][0];
            if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string())
                return c["message"]["content"].get<std::string>();
        }
        throw ParseError("endpoint response has no \"text\" field", res->body);
    }

private:
    std::string base_;
    std::string path_;
    std::string token_;
    std::string model_;
    int timeout_;
};

}  // namespace priorcd
