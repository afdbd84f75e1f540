#pragma once

#include "leadqa/dataset.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace leadqa {

/// A declarative, grounding-ready description of one (question, option) pair.
struct RewrittenQuery {
    std::string question_id;
    int option_index = 0;
    std::string description;
    enum class provenance { llm, cache, stub } source = provenance::llm;
};

std::string to_string(RewrittenQuery::provenance p);

/// Identifier of the versioned prompt template compiled into the binary; a
/// copy ships as a resource file so the rendered text is reviewable.
extern const char* const kPromptTemplateName; // "rewrite_v1"
extern const char* const kPromptTemplate;

/// Instantiates the prompt template for one option. The question and the
/// option text each appear exactly once. Throws schema_error on an
/// out-of-range index or empty question/option text.
std::string render_prompt(const QuestionRecord& record, int option_index);

/// Minimal chat-completion boundary: one prompt in, one completion out.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    /// Stable identifier mixed into cache keys (e.g. provider model name).
    virtual std::string model_id() const = 0;
    /// Returns the completion text. Throws transport_error on delivery
    /// failures and empty_completion_error when the provider returns nothing.
    virtual std::string complete(const std::string& prompt) = 0;
    /// True for clients that never leave the process (affects provenance).
    virtual bool offline() const { return false; }
};

/// Deterministic offline rewriter: lowercases the question, strips leading
/// interrogative/auxiliary words and the trailing question mark, then appends
/// the option text, yielding a declarative "<stem> <option>" caption.
class StubChatClient : public ChatClient {
public:
    std::string model_id() const override { return "stub-v1"; }
    std::string complete(const std::string& prompt) override;
    bool offline() const override { return true; }
};

/// Decorator that counts upstream calls; used to verify cache behaviour.
class CountingChatClient : public ChatClient {
public:
    explicit CountingChatClient(ChatClient& inner) : inner_(inner) {}
    std::string model_id() const override { return inner_.model_id(); }
    std::string complete(const std::string& prompt) override {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return inner_.complete(prompt);
    }
    bool offline() const override { return inner_.offline(); }
    int calls() const { return calls_.load(std::memory_order_relaxed); }

private:
    ChatClient& inner_;
    std::atomic<int> calls_{0};
};

/// HTTPS chat-completion client configured from LEADQA_LLM_ENDPOINT,
/// LEADQA_LLM_KEY and LEADQA_LLM_MODEL. Speaks the common chat JSON schema
/// (model, messages, temperature=0). Throws transport_error when the
/// environment is incomplete.
std::unique_ptr<ChatClient> make_http_client_from_env();

/// Exposed for tests: same client pointed at an explicit endpoint.
std::unique_ptr<ChatClient> make_http_client(const std::string& endpoint,
                                             const std::string& api_key,
                                             const std::string& model);

struct RetryPolicy {
    int attempts = 3;
    int base_delay_ms = 1000; // doubled per retry, with jitter
    double jitter_frac = 0.25;
};

/// Content-addressed completion cache: key = SHA-256 of prompt plus model id,
/// stored as cache/<first 2 hex>/<key>.txt holding the raw completion.
std::filesystem::path cache_path_for(const std::filesystem::path& cache_dir,
                                     const std::string& prompt, const std::string& model_id);

/// Rewrites one (question, option) pair: returns the cached completion when
/// present, otherwise calls the client (with bounded retries on transport
/// errors) and stores the result atomically. The source field records where
/// the description came from.
RewrittenQuery rewrite(const QuestionRecord& record, int option_index, ChatClient& client,
                       const std::filesystem::path& cache_dir,
                       const RetryPolicy& retry = RetryPolicy{});

struct RewriteFailure {
    std::string question_id;
    int option_index = 0;
    std::string message;
};

struct CorpusRewrites {
    std::vector<RewrittenQuery> rewrites; // sorted by (question_id, option_index)
    std::vector<RewriteFailure> failures; // same order; empty on full success
};

/// Rewrites every option of every record with up to `parallelism` concurrent
/// client calls. Per-item failures are collected rather than thrown, so one
/// bad item cannot discard the rest of the corpus.
CorpusRewrites rewrite_corpus(const std::vector<QuestionRecord>& records, ChatClient& client,
                              const std::filesystem::path& cache_dir, int parallelism,
                              const RetryPolicy& retry = RetryPolicy{});

} // namespace leadqa
