#include "leadqa/rewriter.hpp"

#include "leadqa/errors.hpp"
#include "leadqa/io.hpp"
#include "leadqa/rng.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

namespace leadqa {

const char* const kPromptTemplateName = "rewrite_v1";

// Instantiated copies must contain the question and the option exactly once,
// so the surrounding instructions deliberately avoid placeholder-like text.
const char* const kPromptTemplate =
    "You convert a video question and one candidate answer into a single declarative caption.\n"
    "\n"
    "Rewrite the pair below as one concise, factual sentence describing what happens in the\n"
    "video, preserving the causal or temporal link implied by the question. Mention the\n"
    "concrete visual content; do not hedge, speculate, or list alternatives.\n"
    "\n"
    "Question: \"{question}\"\n"
    "Candidate answer: \"{option}\"\n"
    "\n"
    "Respond with the caption only.\n";

std::string to_string(RewrittenQuery::provenance p) {
    switch (p) {
    case RewrittenQuery::provenance::llm: return "llm";
    case RewrittenQuery::provenance::cache: return "cache";
    case RewrittenQuery::provenance::stub: return "stub";
    }
    return "llm";
}

namespace {

void replace_once(std::string& text, const std::string& placeholder, const std::string& value) {
    auto pos = text.find(placeholder);
    if (pos == std::string::npos) {
        throw error(exit_code::internal, "prompt template lacks placeholder " + placeholder);
    }
    text.replace(pos, placeholder.size(), value);
}

// Leading words dropped when turning a question into a declarative stem.
bool is_interrogative(const std::string& word) {
    static const char* const kWords[] = {"why",  "what", "when", "where", "who",  "how",
                                         "did",  "do",   "does", "is",    "are",  "was",
                                         "were"};
    return std::find(std::begin(kWords), std::end(kWords), word) != std::end(kWords);
}

std::string stub_description(const std::string& question, const std::string& option) {
    std::string q;
    q.reserve(question.size());
    for (char c : question) {
        q.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    while (!q.empty() && (q.back() == '?' || q.back() == ' ')) q.pop_back();

    std::istringstream words(q);
    std::vector<std::string> tokens;
    for (std::string w; words >> w;) tokens.push_back(w);

    std::size_t first = 0;
    while (first < tokens.size() && is_interrogative(tokens[first])) ++first;
    if (first == tokens.size()) first = 0; // purely interrogative question: keep it whole

    std::string stem;
    for (std::size_t i = first; i < tokens.size(); ++i) {
        if (!stem.empty()) stem += ' ';
        stem += tokens[i];
    }
    return stem.empty() ? option : stem + " " + option;
}

// Extracts the text of a quoted, line-terminated template field.
std::string extract_field(const std::string& prompt, const std::string& label) {
    const std::string open = label + ": \"";
    auto start = prompt.find(open);
    auto end = start == std::string::npos ? std::string::npos
                                          : prompt.find("\"\n", start + open.size());
    if (start == std::string::npos || end == std::string::npos) {
        throw error(exit_code::internal, "stub client: prompt lacks field '" + label + "'");
    }
    return prompt.substr(start + open.size(), end - (start + open.size()));
}

std::string complete_with_retries(ChatClient& client, const std::string& prompt,
                                  const RetryPolicy& retry) {
    static thread_local std::mt19937_64 jitter_gen(std::random_device{}());
    const int attempts = std::max(1, retry.attempts);
    for (int attempt = 0;; ++attempt) {
        try {
            return client.complete(prompt);
        } catch (const transport_error&) {
            if (attempt + 1 >= attempts) throw;
            double backoff = retry.base_delay_ms * std::pow(2.0, attempt);
            double jitter = uniform(jitter_gen, 1.0 - retry.jitter_frac, 1.0 + retry.jitter_frac);
            auto delay = std::chrono::milliseconds(
                static_cast<long long>(std::max(0.0, backoff * jitter)));
            if (delay.count() > 0) std::this_thread::sleep_for(delay);
        }
    }
}

} // namespace

std::string render_prompt(const QuestionRecord& record, int option_index) {
    if (option_index < 0 || option_index >= static_cast<int>(record.options.size())) {
        throw schema_error("render_prompt: option_index " + std::to_string(option_index) +
                           " outside [0, " + std::to_string(record.options.size()) + ") for '" +
                           record.question_id + "'");
    }
    if (record.question.empty()) {
        throw schema_error("render_prompt: empty question text for '" + record.question_id +
                           "'");
    }
    const std::string& option = record.options[static_cast<std::size_t>(option_index)];
    if (option.empty()) {
        throw schema_error("render_prompt: empty option text for '" + record.question_id +
                           "' option " + std::to_string(option_index));
    }
    std::string prompt = kPromptTemplate;
    replace_once(prompt, "{question}", record.question);
    replace_once(prompt, "{option}", option);
    return prompt;
}

std::string StubChatClient::complete(const std::string& prompt) {
    return stub_description(extract_field(prompt, "Question"),
                            extract_field(prompt, "Candidate answer"));
}

std::filesystem::path cache_path_for(const std::filesystem::path& cache_dir,
                                     const std::string& prompt, const std::string& model_id) {
    const std::string key = sha256_hex(prompt + '\x1f' + model_id);
    return cache_dir / key.substr(0, 2) / (key + ".txt");
}

RewrittenQuery rewrite(const QuestionRecord& record, int option_index, ChatClient& client,
                       const std::filesystem::path& cache_dir, const RetryPolicy& retry) {
    const std::string prompt = render_prompt(record, option_index);
    const std::filesystem::path entry = cache_path_for(cache_dir, prompt, client.model_id());

    RewrittenQuery out;
    out.question_id = record.question_id;
    out.option_index = option_index;
    if (std::filesystem::exists(entry)) {
        std::string cached = read_file(entry);
        if (!cached.empty()) {
            out.description = std::move(cached);
            out.source = RewrittenQuery::provenance::cache;
            return out;
        }
        // An empty cache entry is useless; fall through and re-fetch.
    }

    std::string completion = complete_with_retries(client, prompt, retry);
    if (completion.empty()) {
        throw empty_completion_error("empty completion for '" + record.question_id +
                                     "' option " + std::to_string(option_index));
    }
    atomic_write_file(entry, completion);
    out.description = std::move(completion);
    out.source =
        client.offline() ? RewrittenQuery::provenance::stub : RewrittenQuery::provenance::llm;
    return out;
}

CorpusRewrites rewrite_corpus(const std::vector<QuestionRecord>& records, ChatClient& client,
                              const std::filesystem::path& cache_dir, int parallelism,
                              const RetryPolicy& retry) {
    if (parallelism < 1) {
        throw degenerate_input_error("rewrite_corpus: parallelism must be >= 1");
    }
    struct Task {
        const QuestionRecord* record;
        int option;
    };
    std::vector<Task> tasks;
    for (const QuestionRecord& r : records) {
        for (int o = 0; o < static_cast<int>(r.options.size()); ++o) {
            tasks.push_back({&r, o});
        }
    }

    std::vector<std::optional<RewrittenQuery>> slots(tasks.size());
    std::vector<std::optional<RewriteFailure>> fails(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
            const Task& t = tasks[i];
            try {
                slots[i] = rewrite(*t.record, t.option, client, cache_dir, retry);
            } catch (const std::exception& e) {
                fails[i] = RewriteFailure{t.record->question_id, t.option, e.what()};
            }
        }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(parallelism), tasks.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    CorpusRewrites out;
    for (auto& s : slots) {
        if (s) out.rewrites.push_back(std::move(*s));
    }
    for (auto& f : fails) {
        if (f) out.failures.push_back(std::move(*f));
    }
    auto by_id = [](const auto& a, const auto& b) {
        return std::tie(a.question_id, a.option_index) < std::tie(b.question_id, b.option_index);
    };
    std::sort(out.rewrites.begin(), out.rewrites.end(), by_id);
    std::sort(out.failures.begin(), out.failures.end(), by_id);
    return out;
}

} // namespace leadqa
