#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "leadqa/errors.hpp"
#include "leadqa/metrics.hpp"
#include "leadqa/rng.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <vector>

using leadqa::EvalReport;
using leadqa::QuestionResult;
using leadqa::TimeInterval;
using leadqa::question_type;

namespace {

TimeInterval iv(double s, double e) { return TimeInterval{s, e}; }

QuestionResult make_result(const std::string& id, question_type type, bool correct,
                           double iop, double iou, bool annotated = true) {
    QuestionResult r;
    r.question_id = id;
    r.type = type;
    r.predicted_answer = correct ? 0 : 1;
    r.correct = correct;
    r.iop = iop;
    r.iou = iou;
    if (annotated) r.gt_spans = {iv(0, 1)}; // marker; iop/iou are set directly
    return r;
}

} // namespace

TEST_CASE("score_question hand values") {
    // containment forces iop = 1
    auto contained = leadqa::score_question(iv(5, 8), {iv(0, 10)}, 2, 2);
    CHECK(contained.iop == doctest::Approx(1.0));
    CHECK(contained.correct);

    // max over spans: [0,10] vs {[5,15],[40,50]}
    auto multi = leadqa::score_question(iv(0, 10), {iv(5, 15), iv(40, 50)}, 1, 0);
    CHECK(multi.iop == doctest::Approx(0.5));
    CHECK(multi.iou == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(!multi.correct);

    // absent prediction scores zero
    auto absent = leadqa::score_question(std::nullopt, {iv(5, 15)}, 0, 0);
    CHECK(absent.iop == 0.0);
    CHECK(absent.iou == 0.0);
    CHECK(absent.correct);

    // zero-length prediction treated like absent (no 0/0)
    auto degenerate = leadqa::score_question(iv(4, 4), {iv(0, 10)}, 0, 0);
    CHECK(degenerate.iop == 0.0);
    CHECK(degenerate.iou == 0.0);
}

TEST_CASE("aggregate hand values") {
    // all correct, all iop = 1
    std::vector<QuestionResult> perfect = {
        make_result("q1", question_type::Cau, true, 1.0, 1.0),
        make_result("q2", question_type::Tem, true, 1.0, 0.8),
    };
    auto rep = leadqa::aggregate(perfect);
    CHECK(rep.acc_qa == doctest::Approx(1.0));
    CHECK(rep.acc_gqa == doctest::Approx(1.0));

    // strict threshold: correct but iop 0.4 < 0.5 contributes nothing to gqa
    auto strict = leadqa::aggregate({make_result("q", question_type::Cau, true, 0.4, 0.3)});
    CHECK(strict.acc_qa == doctest::Approx(1.0));
    CHECK(strict.acc_gqa == 0.0);

    // four-question hand count
    std::vector<QuestionResult> four = {
        make_result("a", question_type::Cau, true, 0.6, 0.5),
        make_result("b", question_type::Cau, true, 0.3, 0.2),
        make_result("c", question_type::Tem, false, 0.9, 0.8),
        make_result("d", question_type::Des, true, 0.5, 0.4),
    };
    rep = leadqa::aggregate(four);
    CHECK(rep.acc_qa == doctest::Approx(0.75));
    CHECK(rep.acc_gqa == doctest::Approx(0.5));
    CHECK(rep.iop_at.at(0.5) == doctest::Approx(0.75));
    CHECK(rep.n_questions == 4);
    CHECK(rep.n_annotated == 4);
    // per-type accuracies: Cau 2/2, Tem 0/1, Des 1/1
    CHECK(rep.per_type.at(question_type::Cau) == doctest::Approx(1.0));
    CHECK(rep.per_type.at(question_type::Tem) == 0.0);
    CHECK(rep.per_type.at(question_type::Des) == doctest::Approx(1.0));
}

TEST_CASE("aggregate rejects empty input") {
    CHECK_THROWS_AS((void)leadqa::aggregate({}), leadqa::empty_input_error);
}

TEST_CASE("grounding denominators use annotated questions only") {
    // one annotated question with strong grounding + two unannotated ones
    std::vector<QuestionResult> mixed = {
        make_result("a", question_type::Cau, true, 0.9, 0.8),
        make_result("b", question_type::Cau, false, 0.0, 0.0, /*annotated=*/false),
        make_result("c", question_type::Tem, true, 0.0, 0.0, /*annotated=*/false),
    };
    auto rep = leadqa::aggregate(mixed);
    CHECK(rep.n_annotated == 1);
    CHECK(rep.miop == doctest::Approx(0.9));
    CHECK(rep.miou == doctest::Approx(0.8));
    CHECK(rep.iop_at.at(0.5) == doctest::Approx(1.0));
    // acc_qa/acc_gqa keep the full denominator, preserving gqa <= qa
    CHECK(rep.acc_qa == doctest::Approx(2.0 / 3.0));
    CHECK(rep.acc_gqa == doctest::Approx(1.0 / 3.0));
    CHECK(rep.acc_gqa <= rep.acc_qa);
    CHECK(rep.acc_gqa <= rep.iop_at.at(0.5));

    // no annotations at all: grounding block reports zeros
    std::vector<QuestionResult> none = {
        make_result("a", question_type::Cau, true, 0.0, 0.0, /*annotated=*/false),
    };
    rep = leadqa::aggregate(none);
    CHECK(rep.n_annotated == 0);
    CHECK(rep.miop == 0.0);
    CHECK(rep.miou == 0.0);
    CHECK(rep.iop_at.at(0.3) == 0.0);
    CHECK(rep.iou_at.at(0.5) == 0.0);
    CHECK(rep.acc_qa == doctest::Approx(1.0));
    CHECK(rep.acc_gqa == 0.0);
}

TEST_CASE("aggregate invariants on random result sets") {
    std::mt19937_64 gen(314159);
    for (int trial = 0; trial < 300; ++trial) {
        int n = 1 + static_cast<int>(gen() % 20);
        std::vector<QuestionResult> results;
        for (int i = 0; i < n; ++i) {
            bool annotated = (gen() % 4) != 0;
            bool correct = (gen() % 2) == 0;
            double iop = annotated ? leadqa::uniform01(gen) : 0.0;
            // iou <= iop always (union >= prediction length)
            double iou = annotated ? iop * leadqa::uniform01(gen) : 0.0;
            auto type = static_cast<question_type>(gen() % 5);
            results.push_back(
                make_result("q" + std::to_string(i), type, correct, iop, iou, annotated));
        }
        auto rep = leadqa::aggregate(results);

        CHECK(rep.acc_gqa <= rep.acc_qa + 1e-15);
        CHECK(rep.acc_gqa <= rep.iop_at.at(0.5) + 1e-15);
        CHECK(rep.iop_at.at(0.5) <= rep.iop_at.at(0.3) + 1e-15);
        CHECK(rep.iou_at.at(0.5) <= rep.iou_at.at(0.3) + 1e-15);
        for (double v : {rep.acc_qa, rep.acc_gqa, rep.miop, rep.miou, rep.iop_at.at(0.3),
                         rep.iop_at.at(0.5), rep.iou_at.at(0.3), rep.iou_at.at(0.5)}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }

        // naive recount oracle
        int correct_n = 0, gqa_n = 0, ann_n = 0, iop3 = 0, iop5 = 0, iou3 = 0, iou5 = 0;
        double siop = 0, siou = 0;
        for (const auto& r : results) {
            if (r.correct) correct_n++;
            if (!r.annotated()) continue;
            ann_n++;
            siop += r.iop;
            siou += r.iou;
            if (r.correct && r.iop >= 0.5) gqa_n++;
            if (r.iop >= 0.3) iop3++;
            if (r.iop >= 0.5) iop5++;
            if (r.iou >= 0.3) iou3++;
            if (r.iou >= 0.5) iou5++;
        }
        CHECK(rep.acc_qa == doctest::Approx(double(correct_n) / n).epsilon(1e-12));
        CHECK(rep.acc_gqa == doctest::Approx(double(gqa_n) / n).epsilon(1e-12));
        if (ann_n > 0) {
            CHECK(rep.miop == doctest::Approx(siop / ann_n).epsilon(1e-12));
            CHECK(rep.miou == doctest::Approx(siou / ann_n).epsilon(1e-12));
            CHECK(rep.iop_at.at(0.3) == doctest::Approx(double(iop3) / ann_n).epsilon(1e-12));
            CHECK(rep.iop_at.at(0.5) == doctest::Approx(double(iop5) / ann_n).epsilon(1e-12));
            CHECK(rep.iou_at.at(0.3) == doctest::Approx(double(iou3) / ann_n).epsilon(1e-12));
            CHECK(rep.iou_at.at(0.5) == doctest::Approx(double(iou5) / ann_n).epsilon(1e-12));
        }

        // permutation invariance
        auto shuffled = results;
        std::shuffle(shuffled.begin(), shuffled.end(), gen);
        auto rep2 = leadqa::aggregate(shuffled);
        CHECK(rep2.acc_qa == doctest::Approx(rep.acc_qa).epsilon(1e-12));
        CHECK(rep2.acc_gqa == doctest::Approx(rep.acc_gqa).epsilon(1e-12));
        CHECK(rep2.miop == doctest::Approx(rep.miop).epsilon(1e-12));
        CHECK(rep2.miou == doctest::Approx(rep.miou).epsilon(1e-12));

        // duplicating the whole list changes nothing
        auto doubled = results;
        doubled.insert(doubled.end(), results.begin(), results.end());
        auto rep3 = leadqa::aggregate(doubled);
        CHECK(rep3.acc_qa == doctest::Approx(rep.acc_qa).epsilon(1e-12));
        CHECK(rep3.acc_gqa == doctest::Approx(rep.acc_gqa).epsilon(1e-12));
        CHECK(rep3.miop == doctest::Approx(rep.miop).epsilon(1e-12));
        CHECK(rep3.iop_at.at(0.5) == doctest::Approx(rep.iop_at.at(0.5)).epsilon(1e-12));
    }
}

TEST_CASE("csv export is stable and exact") {
    std::vector<QuestionResult> results = {
        make_result("vid1_q0", question_type::Cau, true, 0.5, 1.0 / 3.0),
        make_result("vid2_q1", question_type::CW, false, 0.0, 0.0, /*annotated=*/false),
    };
    std::string csv = leadqa::results_to_csv(results);
    CHECK(csv == "question_id,type,correct,iop,iou\n"
                 "vid1_q0,Cau,1,0.5,0.3333333333333333\n"
                 "vid2_q1,CW,0,0,0\n");
}

TEST_CASE("question type names round-trip") {
    for (auto t : {question_type::Tem, question_type::Cau, question_type::Des,
                   question_type::CW, question_type::CH}) {
        CHECK(leadqa::question_type_from_string(leadqa::to_string(t)) == t);
    }
    CHECK(leadqa::question_type_from_string("Tem") == question_type::Tem);
    CHECK_THROWS_AS((void)leadqa::question_type_from_string("Foo"), leadqa::schema_error);
}
