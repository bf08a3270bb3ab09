#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lexihal/runner.hpp"

using namespace lexihal;
using namespace lexihal::runner;

namespace {

const std::string kData = LEXIHAL_TEST_DATA_DIR;

RunOptions mock_options(const std::string& script) {
    RunOptions o;
    o.provider = "mock";
    o.script_path = kData + "/" + script;
    o.seed = 7;
    return o;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("run_eval computes the fixture metrics end to end") {
    const auto result = run_eval(kData + "/samples.jsonl", kData + "/outputs.jsonl",
                                 kData + "/statutes.jsonl", mock_options("script.jsonl"));
    CHECK(result.exit_code == kExitOk);
    const auto& r = result.report;
    CHECK(r["aggregates"]["samples_failed"] == 0);

    // hand-checked fixture values: per-sample NHSR {1, 0, -, 0.5},
    // Rel {10, 4, -, 6}, T_LC {9, -, 6, -}
    const auto& per_sample = r["per_sample"];
    REQUIRE(per_sample.size() == 4);
    CHECK(per_sample[0]["nhsr"] == 1.0);
    CHECK(per_sample[0]["rel"] == 10.0);
    CHECK(per_sample[0]["t_lc"] == 9.0);
    CHECK(per_sample[1]["nhsr"] == 0.0);
    CHECK(per_sample[1]["rel"] == 4.0);
    CHECK(per_sample[1]["t_lc"].is_null());
    CHECK(per_sample[1]["statute_checks"][0]["error_type"] == "wrong_number");
    CHECK(per_sample[2]["nhsr"].is_null());
    CHECK(per_sample[2]["rel"].is_null());
    CHECK(per_sample[2]["t_lc"] == 6.0);
    CHECK(per_sample[3]["nhsr"] == 0.5);
    CHECK(per_sample[3]["rel"] == 6.0);
    CHECK(per_sample[3]["statute_checks"][1]["error_type"] == "fabricated");

    CHECK(r["aggregates"]["nhsr_pct"] == 50.0);
    CHECK(r["aggregates"]["nhsr_pct_display"] == "50.000%");
    CHECK(r["aggregates"]["rel_mean"] == 6.667);
    CHECK(r["aggregates"]["t_lc_mean"] == 7.5);
}

TEST_CASE("run_eval matches the committed golden report byte for byte") {
    const auto result = run_eval(kData + "/samples.jsonl", kData + "/outputs.jsonl",
                                 kData + "/statutes.jsonl", mock_options("script.jsonl"));
    const std::string got = report_to_string(result.report);
    const std::string golden = slurp(kData + "/golden_eval_report.json");
    CHECK(got == golden);
}

TEST_CASE("run_eval is deterministic and concurrency-independent") {
    auto base = mock_options("script.jsonl");
    const auto a = run_eval(kData + "/samples.jsonl", kData + "/outputs.jsonl",
                            kData + "/statutes.jsonl", base);
    const auto b = run_eval(kData + "/samples.jsonl", kData + "/outputs.jsonl",
                            kData + "/statutes.jsonl", base);
    CHECK(report_to_string(a.report) == report_to_string(b.report));

    base.max_concurrency = 1;
    const auto serial = run_eval(kData + "/samples.jsonl", kData + "/outputs.jsonl",
                                 kData + "/statutes.jsonl", base);
    CHECK(report_to_string(serial.report) == report_to_string(a.report));
}

TEST_CASE("eval aggregates are recomputable from the per-sample rows") {
    const auto result = run_eval(kData + "/samples.jsonl", kData + "/outputs.jsonl",
                                 kData + "/statutes.jsonl", mock_options("script.jsonl"));
    const auto& r = result.report;
    double nhsr_sum = 0.0, rel_sum = 0.0, tlc_sum = 0.0;
    int nhsr_n = 0, rel_n = 0, tlc_n = 0;
    for (const auto& row : r["per_sample"]) {
        if (!row["nhsr"].is_null()) {
            nhsr_sum += row["nhsr"].get<double>();
            ++nhsr_n;
        }
        if (!row["rel"].is_null()) {
            rel_sum += row["rel"].get<double>();
            ++rel_n;
        }
        if (!row["t_lc"].is_null()) {
            tlc_sum += row["t_lc"].get<double>();
            ++tlc_n;
        }
    }
    const auto round3 = [](double v) { return std::round(v * 1000.0) / 1000.0; };
    CHECK(r["aggregates"]["nhsr_pct"].get<double>() == round3(100.0 * nhsr_sum / nhsr_n));
    CHECK(r["aggregates"]["rel_mean"].get<double>() == round3(rel_sum / rel_n));
    CHECK(r["aggregates"]["t_lc_mean"].get<double>() == round3(tlc_sum / tlc_n));
}

TEST_CASE("pooled NHSR divides by total citations instead") {
    auto options = mock_options("script.jsonl");
    options.pooled_nhsr = true;
    const auto result = run_eval(kData + "/samples.jsonl", kData + "/outputs.jsonl",
                                 kData + "/statutes.jsonl", options);
    // citations: 4 total, 2 non-hallucinated => 50.0 here too (3-of-8 style
    // pooling differs from per-sample only when sample sizes differ)
    CHECK(result.report["aggregates"]["nhsr_aggregation"] == "pooled");
    CHECK(result.report["aggregates"]["nhsr_pct"] == 50.0);
}

TEST_CASE("outputs with unknown sample ids are an input error") {
    const std::string bad = "unknown_outputs_tmp.jsonl";
    {
        std::ofstream out(bad);
        out << R"({"sample_id": "ghost", "answer": "x"})" << "\n";
    }
    CHECK_THROWS_AS(run_eval(kData + "/samples.jsonl", bad, kData + "/statutes.jsonl",
                             mock_options("script.jsonl")),
                    Error);
    std::remove(bad.c_str());
}

TEST_CASE("provider failures mark samples failed and set exit code 2") {
    // empty script: every judge call raises NoScriptMatch
    const std::string empty_script = "empty_script_tmp.jsonl";
    {
        std::ofstream out(empty_script);
    }
    auto options = mock_options("script.jsonl");
    options.script_path = empty_script;
    const auto result = run_eval(kData + "/samples.jsonl", kData + "/outputs.jsonl",
                                 kData + "/statutes.jsonl", options);
    CHECK(result.exit_code == kExitSampleFailures);
    CHECK(result.report["aggregates"]["samples_failed"] == 4);
    CHECK(result.report["per_sample"].empty());
    std::remove(empty_script.c_str());
}

TEST_CASE("run_winrate with a consistent judge counts 3 wins and 1 loss") {
    const auto result =
        run_winrate(kData + "/samples.jsonl", kData + "/wr_answers_a.jsonl",
                    kData + "/wr_answers_b.jsonl", mock_options("wr_script_consistent.jsonl"));
    CHECK(result.exit_code == kExitOk);
    CHECK(result.report["win"] == 3);
    CHECK(result.report["draw"] == 0);
    CHECK(result.report["loss"] == 1);
    CHECK(result.report["percentages"]["win_pct"] == 75.0);
    CHECK(result.report["percentages"]["loss_pct"] == 25.0);
    CHECK(result.report["percentages"]["unbeaten_pct"] == 75.0);
}

TEST_CASE("run_winrate with a position-biased judge draws everything") {
    const auto result =
        run_winrate(kData + "/samples.jsonl", kData + "/wr_answers_a.jsonl",
                    kData + "/wr_answers_b.jsonl", mock_options("wr_script_biased.jsonl"));
    CHECK(result.report["draw"] == 4);
    CHECK(result.report["percentages"]["draw_pct"] == 100.0);
}

TEST_CASE("missing answers are skipped and excluded from denominators") {
    // copy answers-b without s4
    const std::string partial = "wr_partial_tmp.jsonl";
    {
        std::ifstream in(kData + "/wr_answers_b.jsonl");
        std::ofstream out(partial);
        std::string line;
        while (std::getline(in, line))
            if (line.find("s4") == std::string::npos) out << line << "\n";
    }
    const auto result = run_winrate(kData + "/samples.jsonl", kData + "/wr_answers_a.jsonl",
                                    partial, mock_options("wr_script_consistent.jsonl"));
    CHECK(result.report["skipped"].size() == 1);
    CHECK(result.report["skipped"][0] == "s4");
    CHECK(result.report["win"] == 3);
    CHECK(result.report["loss"] == 0);
    CHECK(result.report["percentages"]["win_pct"] == 100.0);
    std::remove(partial.c_str());
}

TEST_CASE("hipo demo runs three rounds with non-decreasing mastery") {
    HipoDemoOptions demo;
    demo.out_dir = "hipo_demo_tmp";
    RunOptions options = mock_options("script.jsonl");
    options.seed = 42;
    const auto result = run_hipo_demo(demo, options);
    CHECK(result.exit_code == kExitOk);
    const auto& rounds = result.report["rounds"];
    REQUIRE(rounds.size() == 3);
    for (std::size_t i = 1; i < rounds.size(); ++i)
        CHECK(rounds[i]["mastered_count"].get<int>() >=
              rounds[i - 1]["mastered_count"].get<int>());
    CHECK(std::filesystem::exists("hipo_demo_tmp/model_sft.json"));
    CHECK(std::filesystem::exists("hipo_demo_tmp/model_final.json"));
    CHECK(std::filesystem::exists("hipo_demo_tmp/hipo_stats.json"));
    std::filesystem::remove_all("hipo_demo_tmp");
}

TEST_CASE("hipo demo with zero rounds reports SFT only") {
    HipoDemoOptions demo;
    demo.config.rounds = 0;
    demo.out_dir = "hipo_demo_tmp0";
    const auto result = run_hipo_demo(demo, mock_options("script.jsonl"));
    CHECK(result.report["rounds"].empty());
    CHECK_FALSE(result.report["sft"]["final_loss"].is_null());
    std::filesystem::remove_all("hipo_demo_tmp0");
}

TEST_CASE("hipo demo stats are identical across reruns with one seed") {
    HipoDemoOptions demo;
    demo.out_dir = "hipo_demo_tmp_a";
    RunOptions options = mock_options("script.jsonl");
    options.seed = 42;
    const auto a = run_hipo_demo(demo, options);
    const std::string stats_a = slurp("hipo_demo_tmp_a/hipo_stats.json");
    demo.out_dir = "hipo_demo_tmp_b";
    const auto b = run_hipo_demo(demo, options);
    const std::string stats_b = slurp("hipo_demo_tmp_b/hipo_stats.json");
    CHECK(stats_a == stats_b);
    CHECK(report_to_string(a.report) == report_to_string(b.report));
    std::filesystem::remove_all("hipo_demo_tmp_a");
    std::filesystem::remove_all("hipo_demo_tmp_b");
}

TEST_CASE("prep revise emits all fixture records without failures") {
    const std::string input = "prep_input_tmp.jsonl";
    {
        std::ofstream out(input);
        out << R"({"id": "p1", "question": "赌博如何处罚？", "answer": "《刑法》第302条：以营利为目的，聚众赌博或者以赌博为业的，处三年以下有期徒刑、拘役或者管制，并处罚金。"})"
            << "\n";
        out << R"({"id": "p2", "question": "侵权怎么办？", "answer": "《侵权责任法》第6条：行为人因过错侵害他人民事权益，应当承担侵权责任。"})"
            << "\n";
        out << R"({"id": "p3", "question": "如何协商？", "answer": "双方可以先行沟通解决。"})"
            << "\n";
    }
    const std::string revise_script = "prep_script_tmp.jsonl";
    {
        std::ofstream out(revise_script);
        // the only failing citation is p1's wrong number; ground the rewrite
        out << R"({"pattern": "[REVISE-ANSWER]", "response": "《刑法》第303条：以营利为目的，聚众赌博或者以赌博为业的，处三年以下有期徒刑、拘役或者管制，并处罚金。"})"
            << "\n";
    }
    auto options = mock_options("script.jsonl");
    options.script_path = revise_script;
    const std::string output = "prep_output_tmp.jsonl";
    const auto result = run_prep_revise(input, kData + "/statutes.jsonl", output, options);
    CHECK(result.exit_code == kExitOk);
    CHECK(result.report["processed"] == 3);
    CHECK(result.report["emitted"] == 3);
    CHECK(result.report["revised"] == 1);
    CHECK(result.report["failed"] == 0);
    CHECK(std::filesystem::exists(output + ".trace.jsonl"));
    const auto records = dataprep::load_qa_records(output);
    CHECK(records.size() == 3);
    std::remove(input.c_str());
    std::remove(revise_script.c_str());
    std::remove(output.c_str());
    std::remove((output + ".trace.jsonl").c_str());
}

TEST_CASE("prep genqa yields at most n questions per statute") {
    const std::string statutes = "genqa_statutes_tmp.jsonl";
    {
        std::ofstream out(statutes);
        out << R"({"id": 0, "law_name": "甲法", "article_number": "1", "content": "甲法规定的内容甲。"})"
            << "\n";
        out << R"({"id": 1, "law_name": "乙法", "article_number": "2", "content": "乙法规定的内容乙。"})"
            << "\n";
    }
    const std::string script = "genqa_script_tmp.jsonl";
    {
        std::ofstream out(script);
        out << R"({"pattern": "\\[GEN-QUESTIONS\\][\\s\\S]*内容甲", "regex": true, "response": "1. 关于甲法的第一种情形应当如何适用与处理？\n2. 关于甲法的第二种情形应当如何适用与处理？"})"
            << "\n";
        out << R"({"pattern": "\\[GEN-QUESTIONS\\][\\s\\S]*内容乙", "regex": true, "response": "1. 关于乙法的第一种情形应当如何适用与处理？"})"
            << "\n";
        out << R"({"pattern": "\\[GEN-ANSWER\\][\\s\\S]*甲法", "regex": true, "response": "依据《甲法》第1条：甲法规定的内容甲。可以照此处理。"})"
            << "\n";
        out << R"({"pattern": "\\[GEN-ANSWER\\][\\s\\S]*乙法", "regex": true, "response": "依据《乙法》第2条：乙法规定的内容乙。可以照此处理。"})"
            << "\n";
    }
    auto options = mock_options("script.jsonl");
    options.script_path = script;
    const std::string output = "genqa_output_tmp.jsonl";
    const auto result = run_prep_genqa(statutes, 2, output, options);
    CHECK(result.exit_code == kExitOk);
    CHECK(result.report["questions"].get<int>() <= 4);
    CHECK(result.report["questions"].get<int>() == 3);
    const auto records = dataprep::load_qa_records(output);
    for (const auto& r : records) CHECK(r.source == dataprep::Source::provision_generated);
    std::remove(statutes.c_str());
    std::remove(script.c_str());
    std::remove(output.c_str());
}

TEST_CASE("prep pairs with disjoint ids yields zero pairs and all warnings") {
    const std::string records = "pairs_records_tmp.jsonl";
    {
        std::ofstream out(records);
        out << R"({"id": "a", "question": "1 2", "answer": "3 0"})" << "\n";
        out << R"({"id": "b", "question": "2 3", "answer": "4 0"})" << "\n";
    }
    const std::string answers = "pairs_answers_tmp.jsonl";
    {
        std::ofstream out(answers);
        out << R"({"sample_id": "x", "answer": "5 0"})" << "\n";
    }
    const std::string output = "pairs_output_tmp.jsonl";
    const auto result = run_prep_pairs(records, answers, output, 16, mock_options("script.jsonl"));
    CHECK(result.report["pairs"] == 0);
    CHECK(result.report["warnings"].size() == 2);
    std::remove(records.c_str());
    std::remove(answers.c_str());
    std::remove(output.c_str());
}

TEST_CASE("config digests are stable for equal configs and differ otherwise") {
    auto a = mock_options("script.jsonl");
    auto b = mock_options("script.jsonl");
    CHECK(config_digest(resolved_config(a, "eval")) == config_digest(resolved_config(b, "eval")));
    b.seed = 8;
    CHECK(config_digest(resolved_config(a, "eval")) != config_digest(resolved_config(b, "eval")));
}

TEST_CASE("sample loading validates duplicate ids") {
    const std::string bad = "dup_samples_tmp.jsonl";
    {
        std::ofstream out(bad);
        out << R"({"id": "x", "question": "q"})" << "\n";
        out << R"({"id": "x", "question": "q2"})" << "\n";
    }
    CHECK_THROWS_AS(load_samples(bad), Error);
    std::remove(bad.c_str());
}
