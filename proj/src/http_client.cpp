// Live chat-completion client. The only TU that includes httplib, with TLS
// enabled, so the header is instantiated consistently across the build.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "leadqa/errors.hpp"
#include "leadqa/rewriter.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>

namespace leadqa {

namespace {

using nlohmann::json;

struct Endpoint {
    std::string base; // scheme://host[:port]
    std::string path; // request path
};

Endpoint split_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos ||
        (url.compare(0, scheme_end, "http") != 0 && url.compare(0, scheme_end, "https") != 0)) {
        throw transport_error("endpoint must be an http(s) URL: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/v1/chat/completions"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpChatClient : public ChatClient {
public:
    HttpChatClient(std::string endpoint, std::string api_key, std::string model)
        : endpoint_(split_endpoint(endpoint)), api_key_(std::move(api_key)),
          model_(std::move(model)) {}

    std::string model_id() const override { return model_; }

    std::string complete(const std::string& prompt) override {
        // One client per call keeps this safe under rewrite_corpus concurrency.
        httplib::Client client(endpoint_.base);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(120, 0);
        httplib::Headers headers;
        if (!api_key_.empty()) {
            headers.emplace("Authorization", "Bearer " + api_key_);
        }

        json body = {
            {"model", model_},
            {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
            {"temperature", 0},
        };
        auto res = client.Post(endpoint_.path, headers, body.dump(), "application/json");
        if (!res) {
            throw transport_error("request to " + endpoint_.base +
                                  " failed: " + httplib::to_string(res.error()));
        }
        if (res->status < 200 || res->status >= 300) {
            throw transport_error("endpoint returned HTTP " + std::to_string(res->status));
        }

        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw transport_error(std::string("malformed completion response: ") + e.what());
        }
        const json* content = nullptr;
        if (auto choices = reply.find("choices");
            choices != reply.end() && choices->is_array() && !choices->empty()) {
            const json& first = (*choices)[0];
            if (auto msg = first.find("message"); msg != first.end() && msg->is_object()) {
                if (auto c = msg->find("content"); c != msg->end() && c->is_string()) {
                    content = &*c;
                }
            }
        }
        if (content == nullptr) {
            throw transport_error("completion response lacks choices[0].message.content");
        }
        std::string text = content->get<std::string>();
        if (text.empty()) {
            throw empty_completion_error("endpoint returned an empty completion");
        }
        return text;
    }

private:
    Endpoint endpoint_;
    std::string api_key_;
    std::string model_;
};

std::string env_or(const char* name, const char* fallback) {
    const char* v = std::getenv(name);
    return v != nullptr ? v : fallback;
}

} // namespace

std::unique_ptr<ChatClient> make_http_client(const std::string& endpoint,
                                             const std::string& api_key,
                                             const std::string& model) {
    return std::make_unique<HttpChatClient>(endpoint, api_key, model);
}

std::unique_ptr<ChatClient> make_http_client_from_env() {
    std::string endpoint = env_or("LEADQA_LLM_ENDPOINT", "");
    if (endpoint.empty()) {
        throw transport_error("LEADQA_LLM_ENDPOINT is not set (required for live mode)");
    }
    std::string model = env_or("LEADQA_LLM_MODEL", "");
    if (model.empty()) {
        throw transport_error("LEADQA_LLM_MODEL is not set (required for live mode)");
    }
    return make_http_client(endpoint, env_or("LEADQA_LLM_KEY", ""), model);
}

} // namespace leadqa
