#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "lexihal/runner.hpp"
#include "lexihal/text.hpp"

namespace {

using lexihal::Error;
using namespace lexihal::runner;

// Flat key=value config file; command-line flags win over file values.
std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::map<std::string, std::string> values;
    std::ifstream in(path);
    if (!in) throw Error(lexihal::ErrorKind::IoError, "cannot open config file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        const std::string trimmed = lexihal::text::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw Error(lexihal::ErrorKind::ParseError, "config line is not key=value: " + trimmed);
        values[lexihal::text::trim(trimmed.substr(0, eq))] =
            lexihal::text::trim(trimmed.substr(eq + 1));
    }
    return values;
}

lexihal::metrics::ContainmentMode parse_containment(const std::string& s) {
    if (s == "paper") return lexihal::metrics::ContainmentMode::paper;
    if (s == "reverse") return lexihal::metrics::ContainmentMode::reverse;
    if (s == "either") return lexihal::metrics::ContainmentMode::either;
    throw Error(lexihal::ErrorKind::InvalidArgument, "containment must be paper|reverse|either");
}

void emit(const RunResult& result, const std::string& report_path, bool to_stdout) {
    if (!report_path.empty()) write_report(result.report, report_path);
    if (to_stdout) std::cout << report_to_string(result.report);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lexihal: legal-hallucination metrics, win-rate protocol, data prep and a HIPO demo"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "flat key=value config file (flags override)");

    RunOptions options;
    std::string containment = "paper";
    std::string report_path;
    std::string samples_path, outputs_path, statutes_path;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "flat key=value config file (flags override)");
        cmd->add_option("--provider", options.provider, "mock|http");
        cmd->add_option("--script", options.script_path, "chat script (JSONL) for the mock provider");
        cmd->add_option("--embed-url", options.embed_url, "HTTP embedding endpoint");
        cmd->add_option("--chat-url", options.chat_url, "HTTP chat endpoint");
        cmd->add_option("--embed-dim", options.embed_dim, "embedding dimension");
        cmd->add_option("--seed", options.seed, "run seed (embedded in reports)");
        cmd->add_option("--max-concurrency", options.max_concurrency, "parallel in-flight samples");
        cmd->add_option("--containment", containment, "content check direction: paper|reverse|either");
        cmd->add_option("--fabrication-floor", options.check.fabrication_floor,
                        "similarity floor below which citations count as fabricated");
        cmd->add_flag_callback(
            "--strict-content", [&] { options.check.vacuous_content_ok = false; },
            "fail the content check when a citation quotes no provision text");
        cmd->add_option("--prompt-dir", options.prompt_dir, "prompt template override directory");
        cmd->add_option("--grammar", options.grammar_path, "citation grammar override file");
        cmd->add_option("--report", report_path, "write the JSON report here");
    };

    auto* eval = app.add_subcommand("eval", "batch hallucination metrics over a corpus");
    eval->add_option("--samples", samples_path, "samples JSONL")->required();
    eval->add_option("--outputs", outputs_path, "model outputs JSONL")->required();
    eval->add_option("--statutes", statutes_path, "statute database JSONL")->required();
    eval->add_flag("--pooled", options.pooled_nhsr, "pool citations across samples for NHSR");
    eval->add_flag("--llm-fallback", options.llm_extraction_fallback,
                   "use the extraction prompt when patterns find nothing");
    add_common(eval);

    std::string answers_a_path, answers_b_path;
    auto* winrate = app.add_subcommand("winrate", "swap-debiased pairwise comparison");
    winrate->add_option("--samples", samples_path, "samples JSONL (questions)")->required();
    winrate->add_option("--answers-a", answers_a_path, "candidate A answers JSONL")->required();
    winrate->add_option("--answers-b", answers_b_path, "candidate B answers JSONL")->required();
    add_common(winrate);

    HipoDemoOptions demo;
    std::string decode = "sample";
    std::string indicator = "on_hallucination";
    auto* hipo_demo = app.add_subcommand("hipo-demo", "iterative preference-training demo");
    hipo_demo->add_option("--rounds", demo.config.rounds, "HIPO rounds");
    hipo_demo->add_option("--beta", demo.config.beta, "DPO temperature");
    hipo_demo->add_option("--tau", demo.config.sim_threshold, "mastery similarity threshold");
    hipo_demo->add_option("--lr", demo.config.learning_rate, "HIPO learning rate");
    hipo_demo->add_option("--steps", demo.config.steps_per_round, "gradient steps per round");
    hipo_demo->add_option("--max-gen-len", demo.config.max_gen_len, "generation length cap");
    hipo_demo->add_option("--decode", decode, "greedy|sample");
    hipo_demo->add_option("--indicator", indicator, "on_hallucination|always_on|always_off");
    hipo_demo->add_option("--sft-steps", demo.sft_steps, "SFT gradient steps");
    hipo_demo->add_option("--sft-lr", demo.sft_learning_rate, "SFT learning rate");
    hipo_demo->add_option("--pairs", demo.pairs_path, "external pair corpus JSONL");
    hipo_demo->add_option("--out-dir", demo.out_dir, "checkpoint/stats directory");
    add_common(hipo_demo);

    auto* prep = app.add_subcommand("prep", "training-data construction pipelines");
    prep->require_subcommand(1);

    std::string input_path, output_path, records_path, model_answers_path;
    int per_statute = 3;
    int vocab_size = 256;

    auto* revise = prep->add_subcommand("revise", "statute-revision of raw QA answers");
    revise->add_option("--input", input_path, "raw QA JSONL")->required();
    revise->add_option("--statutes", statutes_path, "statute database JSONL")->required();
    revise->add_option("--output", output_path, "revised QARecord JSONL")->required();
    add_common(revise);

    auto* genqa = prep->add_subcommand("genqa", "provision-grounded QA generation");
    genqa->add_option("--statutes", statutes_path, "statute database JSONL")->required();
    genqa->add_option("--n", per_statute, "questions per statute");
    genqa->add_option("--output", output_path, "generated QARecord JSONL")->required();
    add_common(genqa);

    auto* pairs = prep->add_subcommand("pairs", "assemble HIPO preference pairs");
    pairs->add_option("--records", records_path, "QARecord JSONL")->required();
    pairs->add_option("--model-answers", model_answers_path, "model answers JSONL")->required();
    pairs->add_option("--output", output_path, "pair corpus JSONL")->required();
    pairs->add_option("--vocab", vocab_size, "tokenizer vocabulary size");
    add_common(pairs);

    // Config file values become defaults; explicit flags then override them.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                for (const auto& [key, value] : load_config_file(argv[i + 1])) {
                    if (key == "provider") options.provider = value;
                    else if (key == "script") options.script_path = value;
                    else if (key == "embed_url") options.embed_url = value;
                    else if (key == "chat_url") options.chat_url = value;
                    else if (key == "embed_dim") options.embed_dim = std::stoul(value);
                    else if (key == "seed") options.seed = std::stoull(value);
                    else if (key == "max_concurrency") options.max_concurrency = std::stoi(value);
                    else if (key == "containment") containment = value;
                    else if (key == "fabrication_floor")
                        options.check.fabrication_floor = std::stod(value);
                    else if (key == "prompt_dir") options.prompt_dir = value;
                    else if (key == "report") report_path = value;
                    else
                        throw Error(lexihal::ErrorKind::InvalidArgument,
                                    "unknown config key: " + key);
                }
            } catch (const Error& e) {
                std::cerr << e.what() << '\n';
                return kExitInputError;
            }
            break;
        }
    }

    CLI11_PARSE(app, argc, argv);

    try {
        options.check.containment = parse_containment(containment);

        RunResult result;
        if (eval->parsed()) {
            result = run_eval(samples_path, outputs_path, statutes_path, options);
            emit(result, report_path, true);
        } else if (winrate->parsed()) {
            result = run_winrate(samples_path, answers_a_path, answers_b_path, options);
            emit(result, report_path, true);
        } else if (hipo_demo->parsed()) {
            if (decode == "greedy") demo.config.decode_mode = lexihal::hipo::DecodeMode::greedy;
            else if (decode == "sample") demo.config.decode_mode = lexihal::hipo::DecodeMode::sample;
            else throw Error(lexihal::ErrorKind::InvalidArgument, "decode must be greedy|sample");
            if (indicator == "on_hallucination")
                demo.config.indicator_mode = lexihal::hipo::IndicatorMode::on_hallucination;
            else if (indicator == "always_on")
                demo.config.indicator_mode = lexihal::hipo::IndicatorMode::always_on;
            else if (indicator == "always_off")
                demo.config.indicator_mode = lexihal::hipo::IndicatorMode::always_off;
            else
                throw Error(lexihal::ErrorKind::InvalidArgument,
                            "indicator must be on_hallucination|always_on|always_off");

            result = run_hipo_demo(demo, options);
            // human-readable per-round table; the JSON report goes to --report
            std::printf("%-6s %-10s %-9s %-12s %-12s\n", "round", "train_size", "mastered",
                        "mean_loss", "margin");
            std::printf("SFT    %-10zu %-9s %-12.6f %-12s\n",
                        result.report["corpus_size"].get<std::size_t>(), "-",
                        result.report["sft"]["final_loss"].is_null()
                            ? 0.0
                            : result.report["sft"]["final_loss"].get<double>(),
                        "-");
            for (const auto& r : result.report["rounds"]) {
                std::printf("%-6d %-10d %-9d %-12.6f %-12.6f\n", r["round"].get<int>(),
                            r["train_set_size"].get<int>(), r["mastered_count"].get<int>(),
                            r["mean_loss"].is_null() ? 0.0 : r["mean_loss"].get<double>(),
                            r["mean_chosen_margin"].is_null()
                                ? 0.0
                                : r["mean_chosen_margin"].get<double>());
            }
            if (!report_path.empty()) write_report(result.report, report_path);
        } else if (revise->parsed()) {
            result = run_prep_revise(input_path, statutes_path, output_path, options);
            emit(result, report_path, true);
        } else if (genqa->parsed()) {
            result = run_prep_genqa(statutes_path, per_statute, output_path, options);
            emit(result, report_path, true);
        } else if (pairs->parsed()) {
            result = run_prep_pairs(records_path, model_answers_path, output_path, vocab_size,
                                    options);
            emit(result, report_path, true);
        }
        return result.exit_code;
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    }
}
