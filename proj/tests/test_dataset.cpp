#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "leadqa/dataset.hpp"
#include "leadqa/errors.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

using namespace leadqa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("leadqa_dataset_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static inline int counter = 0;
};

fs::path write_jsonl(const TempDir& tmp, const std::string& name, const std::string& body) {
    fs::path p = tmp.path / name;
    std::ofstream f(p, std::ios::binary);
    f << body;
    return p;
}

const char* kValidLine =
    R"({"video_id":"v1","question_id":"v1_q0","question":"why did the boy cry?",)"
    R"("options":["he fell","he lost","he won","he slept","he ate"],"answer_index":0,)"
    R"("question_type":"Cau","gt_spans":[[2.0,8.5]],"duration_s":30.0})";

std::string with_field(const std::string& json_line, const std::string& field,
                       const std::string& replacement) {
    // Replaces "field":<value> up to the next top-level comma or closing brace.
    auto key = "\"" + field + "\":";
    auto start = json_line.find(key);
    REQUIRE(start != std::string::npos);
    auto value_start = start + key.size();
    int depth = 0;
    auto end = value_start;
    for (; end < json_line.size(); ++end) {
        char c = json_line[end];
        if (c == '[' || c == '{') ++depth;
        if (c == ']' || c == '}') {
            if (depth == 0) break;
            --depth;
        }
        if (c == ',' && depth == 0) break;
    }
    std::string out = json_line;
    out.replace(value_start, end - value_start, replacement);
    return out;
}

std::string swap_id(const std::string& line, const std::string& id) {
    return with_field(line, "question_id", "\"" + id + "\"");
}

} // namespace

TEST_CASE("three valid lines ingest into three records") {
    TempDir tmp;
    std::string body = std::string(kValidLine) + "\n" + swap_id(kValidLine, "v1_q1") + "\n" +
                       swap_id(kValidLine, "v1_q2") + "\n";
    IngestResult got = ingest_dataset(write_jsonl(tmp, "d.jsonl", body));
    REQUIRE(got.records.size() == 3);
    CHECK(got.warnings.empty());

    const QuestionRecord& r = got.records[0];
    CHECK(r.video_id == "v1");
    CHECK(r.question_id == "v1_q0");
    CHECK(r.question == "why did the boy cry?");
    REQUIRE(r.options.size() == 5);
    CHECK(r.options[0] == "he fell");
    CHECK(r.answer_index == 0);
    CHECK(r.type == question_type::Cau);
    REQUIRE(r.gt_spans.size() == 1);
    CHECK(r.gt_spans[0].t_start == 2.0);
    CHECK(r.gt_spans[0].t_end == 8.5);
    CHECK(r.duration_s == 30.0);
    CHECK(r.annotated());
    CHECK(got.records[1].question_id == "v1_q1");
    CHECK(got.records[2].question_id == "v1_q2");
}

TEST_CASE("blank lines are skipped") {
    TempDir tmp;
    std::string body = std::string("\n") + kValidLine + "\n\n" + swap_id(kValidLine, "q2") + "\n\n";
    CHECK(ingest_dataset(write_jsonl(tmp, "d.jsonl", body)).records.size() == 2);
}

TEST_CASE("duplicate question_id is a schema violation naming the id") {
    TempDir tmp;
    std::string body = std::string(kValidLine) + "\n" + kValidLine + "\n";
    fs::path p = write_jsonl(tmp, "d.jsonl", body);
    CHECK_THROWS_WITH_AS(ingest_dataset(p), doctest::Contains("v1_q0"), schema_error);
}

TEST_CASE("spans are clamped into the video with a warning") {
    TempDir tmp;
    std::string line = with_field(with_field(kValidLine, "gt_spans", "[[-1,5]]"),
                                  "duration_s", "10.0");
    IngestResult got = ingest_dataset(write_jsonl(tmp, "d.jsonl", line + "\n"));
    REQUIRE(got.records.size() == 1);
    REQUIRE(got.records[0].gt_spans.size() == 1);
    CHECK(got.records[0].gt_spans[0].t_start == 0.0);
    CHECK(got.records[0].gt_spans[0].t_end == 5.0);
    REQUIRE(got.warnings.size() == 1);
    CHECK(got.warnings[0].find("clamped") != std::string::npos);

    // A span that lies entirely outside the video collapses but is kept.
    std::string below = with_field(kValidLine, "gt_spans", "[[-5,-1]]");
    IngestResult got2 = ingest_dataset(write_jsonl(tmp, "d2.jsonl", below + "\n"));
    REQUIRE(got2.records[0].gt_spans.size() == 1);
    CHECK(got2.records[0].gt_spans[0].t_start == 0.0);
    CHECK(got2.records[0].gt_spans[0].t_end == 0.0);
    CHECK(got2.warnings.size() == 1);

    // End beyond duration clamps down.
    std::string above = with_field(kValidLine, "gt_spans", "[[25,99]]");
    IngestResult got3 = ingest_dataset(write_jsonl(tmp, "d3.jsonl", above + "\n"));
    CHECK(got3.records[0].gt_spans[0].t_end == 30.0);
    CHECK(got3.warnings.size() == 1);
}

TEST_CASE("inverted span stays invalid after clamping") {
    TempDir tmp;
    std::string line = with_field(kValidLine, "gt_spans", "[[8,2]]");
    CHECK_THROWS_AS(ingest_dataset(write_jsonl(tmp, "d.jsonl", line + "\n")), schema_error);
}

TEST_CASE("malformed JSON reports the line number") {
    TempDir tmp;
    std::string body = std::string(kValidLine) + "\n{not json\n";
    fs::path p = write_jsonl(tmp, "d.jsonl", body);
    CHECK_THROWS_WITH_AS(ingest_dataset(p), doctest::Contains(":2"), parse_error);
}

TEST_CASE("schema violations name the offending field") {
    TempDir tmp;
    auto expect_schema = [&](const std::string& line, const char* needle) {
        fs::path p = write_jsonl(tmp, "bad.jsonl", line + "\n");
        CHECK_THROWS_WITH_AS(ingest_dataset(p), doctest::Contains(needle), schema_error);
    };

    std::string no_question = kValidLine;
    no_question.replace(no_question.find("\"question\""), 10, "\"questioX\"");
    expect_schema(no_question, "question");

    expect_schema(with_field(kValidLine, "answer_index", "7"), "answer_index");
    expect_schema(with_field(kValidLine, "answer_index", "-1"), "answer_index");
    expect_schema(with_field(kValidLine, "answer_index", "1.5"), "answer_index");
    expect_schema(with_field(kValidLine, "duration_s", "0"), "duration_s");
    expect_schema(with_field(kValidLine, "duration_s", "-3"), "duration_s");
    expect_schema(with_field(kValidLine, "question_type", "\"Xyz\""), "question_type");
    expect_schema(with_field(kValidLine, "options", "[]"), "options");
    expect_schema(with_field(kValidLine, "options", "[\"a\",\"\"]"), "options[1]");
    expect_schema(with_field(kValidLine, "options", "\"not a list\""), "options");
    expect_schema(with_field(kValidLine, "gt_spans", "[[1,2,3]]"), "gt_spans[0]");
    expect_schema(with_field(kValidLine, "gt_spans", "[[1,\"x\"]]"), "gt_spans[0]");
    expect_schema(with_field(kValidLine, "video_id", "\"\""), "video_id");
    expect_schema("[1,2,3]", "object");
}

TEST_CASE("gt_spans may be absent or null") {
    TempDir tmp;
    std::string no_spans = with_field(kValidLine, "gt_spans", "null");
    IngestResult got = ingest_dataset(write_jsonl(tmp, "d.jsonl", no_spans + "\n"));
    CHECK_FALSE(got.records[0].annotated());

    std::string erased = kValidLine;
    auto pos = erased.find(",\"gt_spans\":[[2.0,8.5]]");
    REQUIRE(pos != std::string::npos);
    erased.erase(pos, std::string(",\"gt_spans\":[[2.0,8.5]]").size());
    IngestResult got2 = ingest_dataset(write_jsonl(tmp, "d2.jsonl", erased + "\n"));
    CHECK_FALSE(got2.records[0].annotated());
}

TEST_CASE("every question type round-trips through ingestion") {
    TempDir tmp;
    std::string body;
    const char* types[] = {"Tem", "Cau", "Des", "CW", "CH"};
    for (int i = 0; i < 5; ++i) {
        body += with_field(swap_id(kValidLine, "q" + std::to_string(i)), "question_type",
                           std::string("\"") + types[i] + "\"") +
                "\n";
    }
    IngestResult got = ingest_dataset(write_jsonl(tmp, "d.jsonl", body));
    REQUIRE(got.records.size() == 5);
    CHECK(got.records[0].type == question_type::Tem);
    CHECK(got.records[1].type == question_type::Cau);
    CHECK(got.records[2].type == question_type::Des);
    CHECK(got.records[3].type == question_type::CW);
    CHECK(got.records[4].type == question_type::CH);
}

TEST_CASE("missing dataset file is a missing-upstream error") {
    CHECK_THROWS_AS(ingest_dataset("/nonexistent/dataset.jsonl"), missing_upstream_error);
}
