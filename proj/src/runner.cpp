#include "lexihal/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "lexihal/extraction.hpp"
#include "lexihal/statute_store.hpp"
#include "lexihal/text.hpp"

namespace lexihal::runner {

using nlohmann::json;

namespace {

json parse_jsonl_line(const std::string& path, int line_no, const std::string& line) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
}

double round_to(double v, double scale) { return std::round(v * scale) / scale; }
double round3(double v) { return round_to(v, 1000.0); }
double round6(double v) { return round_to(v, 1000000.0); }

std::string pct_display(double pct) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f%%", pct);
    return buf;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Index-sharded worker pool; fn must handle its own failures.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    const int count = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (count == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(count));
    for (int w = 0; w < count; ++w)
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                fn(i);
            }
        });
    for (auto& t : pool) t.join();
}

const char* containment_name(metrics::ContainmentMode m) {
    switch (m) {
        case metrics::ContainmentMode::paper: return "paper";
        case metrics::ContainmentMode::reverse: return "reverse";
        case metrics::ContainmentMode::either: return "either";
    }
    return "paper";
}

}  // namespace

std::vector<EvalSample> load_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open samples file: " + path);
    std::vector<EvalSample> samples;
    std::set<std::string> ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const json j = parse_jsonl_line(path, line_no, line);
        EvalSample s;
        try {
            s.id = j.at("id").get<std::string>();
            s.question = j.at("question").get<std::string>();
            if (j.contains("reference_statute_ids"))
                s.reference_statute_ids =
                    j.at("reference_statute_ids").get<std::vector<std::int64_t>>();
            if (j.contains("reference_answer"))
                s.reference_answer = j.at("reference_answer").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!ids.insert(s.id).second)
            throw Error(ErrorKind::ParseError,
                        path + ":" + std::to_string(line_no) + ": duplicate sample id " + s.id);
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<OutputRecord> load_outputs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open outputs file: " + path);
    std::vector<OutputRecord> outputs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const json j = parse_jsonl_line(path, line_no, line);
        OutputRecord r;
        try {
            r.sample_id = j.contains("sample_id") ? j.at("sample_id").get<std::string>()
                                                  : j.at("id").get<std::string>();
            r.answer = j.at("answer").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        outputs.push_back(std::move(r));
    }
    return outputs;
}

Providers make_providers(const RunOptions& options) {
    Providers p;
    if (options.provider == "mock") {
        p.embedder = std::make_unique<providers::HashEmbedder>(options.embed_dim);
        std::vector<providers::ScriptRule> rules;
        if (!options.script_path.empty()) rules = providers::load_script(options.script_path);
        p.chat = std::make_unique<providers::ScriptedChatProvider>(std::move(rules));
    } else if (options.provider == "http") {
        providers::HttpConfig embed_cfg;
        embed_cfg.url = options.embed_url;
        providers::HttpConfig chat_cfg;
        chat_cfg.url = options.chat_url;
        p.embedder = std::make_unique<providers::HttpEmbedder>(embed_cfg, options.embed_dim);
        p.chat = std::make_unique<providers::HttpChatProvider>(chat_cfg);
    } else {
        throw Error(ErrorKind::InvalidArgument, "unknown provider: " + options.provider);
    }
    return p;
}

prompts::TemplateSet resolve_templates(const RunOptions& options) {
    return options.prompt_dir.empty() ? prompts::builtin()
                                      : prompts::load_overrides(options.prompt_dir);
}

namespace {

extraction::CitationGrammar resolve_grammar(const RunOptions& options) {
    return options.grammar_path.empty() ? extraction::CitationGrammar::builtin()
                                        : extraction::load_grammar(options.grammar_path);
}

}  // namespace

std::string config_digest(const std::map<std::string, std::string>& resolved) {
    std::string canonical;
    for (const auto& [k, v] : resolved) canonical += k + "=" + v + "\n";
    return text::to_hex(text::fnv1a64(canonical));
}

std::map<std::string, std::string> resolved_config(const RunOptions& options,
                                                   const std::string& subcommand) {
    std::map<std::string, std::string> m;
    m["subcommand"] = subcommand;
    m["version"] = kVersion;
    m["provider"] = options.provider;
    m["script"] = options.script_path;
    m["embed_dim"] = std::to_string(options.embed_dim);
    m["seed"] = std::to_string(options.seed);
    // max_concurrency deliberately omitted: it cannot change any result byte
    m["containment"] = containment_name(options.check.containment);
    m["fabrication_floor"] = std::to_string(options.check.fabrication_floor);
    m["vacuous_content_ok"] = options.check.vacuous_content_ok ? "true" : "false";
    m["prompt_dir"] = options.prompt_dir;
    m["grammar"] = options.grammar_path;
    m["pooled_nhsr"] = options.pooled_nhsr ? "true" : "false";
    m["llm_extraction_fallback"] = options.llm_extraction_fallback ? "true" : "false";
    return m;
}

std::string report_to_string(const json& report) { return report.dump(2) + "\n"; }

void write_report(const json& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write report: " + path);
    out << report_to_string(report);
}

RunResult run_eval(const std::string& samples_path, const std::string& outputs_path,
                   const std::string& statutes_path, const RunOptions& options) {
    const auto samples = load_samples(samples_path);
    const auto outputs = load_outputs(outputs_path);
    std::map<std::string, const EvalSample*> by_id;
    for (const auto& s : samples) by_id[s.id] = &s;
    for (const auto& o : outputs)
        if (!by_id.count(o.sample_id))
            throw Error(ErrorKind::ParseError,
                        outputs_path + ": output references unknown sample_id " + o.sample_id);

    const auto bundle = make_providers(options);
    const auto store = store::load_store(statutes_path, *bundle.embedder);
    const auto templates = resolve_templates(options);
    auto grammar = resolve_grammar(options);
    grammar.llm_fallback_enabled = options.llm_extraction_fallback;

    struct SampleSlot {
        bool failed = false;
        std::string error;
        metrics::SampleMetrics metrics;
    };
    std::vector<SampleSlot> slots(outputs.size());

    parallel_for(outputs.size(), options.max_concurrency, [&](std::size_t i) {
        auto& slot = slots[i];
        const auto& output = outputs[i];
        const auto& sample = *by_id.at(output.sample_id);
        try {
            const auto citations = extraction::extract_citations(
                output.answer, grammar, bundle.chat.get(), templates);
            for (const auto& citation : citations)
                slot.metrics.statute_checks.push_back(
                    metrics::check_statute(citation, store, *bundle.embedder, options.check));
            slot.metrics.nhsr = metrics::nhsr(slot.metrics.statute_checks);
            if (!slot.metrics.statute_checks.empty())
                slot.metrics.rel = metrics::statute_relevance(
                    sample.question, slot.metrics.statute_checks, store, *bundle.chat, templates);
            slot.metrics.t_lc = metrics::legal_claim_truthfulness(sample.question, output.answer,
                                                                  *bundle.chat, templates);
        } catch (const std::exception& e) {
            slot.failed = true;
            slot.error = e.what();
        }
    });

    json per_sample = json::array();
    json failures = json::array();
    double nhsr_sum = 0.0;
    std::size_t nhsr_count = 0;
    std::size_t pooled_good = 0, pooled_total = 0;
    double rel_sum = 0.0;
    std::size_t rel_count = 0;
    double tlc_sum = 0.0;
    std::size_t tlc_count = 0;

    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const auto& slot = slots[i];
        if (slot.failed) {
            failures.push_back({{"id", outputs[i].sample_id}, {"error", slot.error}});
            continue;
        }
        const auto& m = slot.metrics;
        json checks = json::array();
        for (const auto& c : m.statute_checks) {
            checks.push_back({
                {"law_name", c.citation.law_name ? json(*c.citation.law_name) : json(nullptr)},
                {"article_number",
                 c.citation.article_number ? json(*c.citation.article_number) : json(nullptr)},
                {"content_present", c.citation.content.has_value()},
                {"best_id", c.best_id},
                {"similarity", round6(c.best_similarity)},
                {"name_ok", c.name_ok},
                {"number_ok", c.number_ok},
                {"content_ok", c.content_ok},
                {"error_type", metrics::error_type_name(c.error_type)},
            });
            ++pooled_total;
            if (c.non_hallucinated()) ++pooled_good;
        }
        if (m.nhsr) {
            nhsr_sum += *m.nhsr;
            ++nhsr_count;
        }
        if (m.rel) {
            rel_sum += *m.rel;
            ++rel_count;
        }
        if (m.t_lc) {
            tlc_sum += *m.t_lc;
            ++tlc_count;
        }
        per_sample.push_back({
            {"id", outputs[i].sample_id},
            {"n_citations", m.statute_checks.size()},
            {"nhsr", opt_json(m.nhsr)},
            {"rel", opt_json(m.rel)},
            {"t_lc", opt_json(m.t_lc)},
            {"statute_checks", std::move(checks)},
        });
    }

    std::optional<double> nhsr_pct;
    if (options.pooled_nhsr) {
        if (pooled_total > 0)
            nhsr_pct = round3(100.0 * static_cast<double>(pooled_good) /
                              static_cast<double>(pooled_total));
    } else if (nhsr_count > 0) {
        nhsr_pct = round3(100.0 * nhsr_sum / static_cast<double>(nhsr_count));
    }
    std::optional<double> rel_mean;
    if (rel_count > 0) rel_mean = round3(rel_sum / static_cast<double>(rel_count));
    std::optional<double> tlc_mean;
    if (tlc_count > 0) tlc_mean = round3(tlc_sum / static_cast<double>(tlc_count));

    json report;
    report["subcommand"] = "eval";
    report["version"] = kVersion;
    report["seed"] = options.seed;
    report["config_digest"] = config_digest(resolved_config(options, "eval"));
    report["aggregates"] = {
        {"nhsr_aggregation", options.pooled_nhsr ? "pooled" : "per_sample"},
        {"nhsr_pct", opt_json(nhsr_pct)},
        {"nhsr_pct_display", nhsr_pct ? json(pct_display(*nhsr_pct)) : json(nullptr)},
        {"rel_mean", opt_json(rel_mean)},
        {"t_lc_mean", opt_json(tlc_mean)},
        {"samples_evaluated", outputs.size() - failures.size()},
        {"samples_failed", failures.size()},
        {"samples_with_citations", nhsr_count},
        {"samples_with_rel", rel_count},
        {"samples_with_t_lc", tlc_count},
    };
    report["per_sample"] = std::move(per_sample);
    report["failures"] = failures;

    return {std::move(report), failures.empty() ? kExitOk : kExitSampleFailures};
}

RunResult run_winrate(const std::string& samples_path, const std::string& answers_a_path,
                      const std::string& answers_b_path, const RunOptions& options) {
    const auto samples = load_samples(samples_path);
    std::map<std::string, std::string> answers_a, answers_b;
    for (const auto& r : load_outputs(answers_a_path)) answers_a[r.sample_id] = r.answer;
    for (const auto& r : load_outputs(answers_b_path)) answers_b[r.sample_id] = r.answer;

    const auto bundle = make_providers(options);
    const auto templates = resolve_templates(options);

    struct Slot {
        bool skipped = false;
        bool failed = false;
        std::string error;
        winrate::PairOutcome outcome;
    };
    std::vector<Slot> slots(samples.size());

    parallel_for(samples.size(), options.max_concurrency, [&](std::size_t i) {
        auto& slot = slots[i];
        const auto& sample = samples[i];
        const auto a = answers_a.find(sample.id);
        const auto b = answers_b.find(sample.id);
        if (a == answers_a.end() || b == answers_b.end()) {
            slot.skipped = true;
            return;
        }
        try {
            slot.outcome = winrate::debiased_compare(sample.question, a->second, b->second,
                                                     *bundle.chat, templates);
        } catch (const std::exception& e) {
            slot.failed = true;
            slot.error = e.what();
        }
    });

    const auto verdict_json = [](const winrate::JudgeVerdict& v) {
        return json{
            {"first", {v.first.helpfulness, v.first.relevance, v.first.completeness}},
            {"second", {v.second.helpfulness, v.second.relevance, v.second.completeness}},
            {"preferred", winrate::preference_name(v.preferred)},
        };
    };

    json per_sample = json::array();
    json skipped = json::array();
    json failures = json::array();
    std::vector<winrate::Outcome> outcomes;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& slot = slots[i];
        if (slot.skipped) {
            skipped.push_back(samples[i].id);
            continue;
        }
        if (slot.failed) {
            failures.push_back({{"id", samples[i].id}, {"error", slot.error}});
            continue;
        }
        outcomes.push_back(slot.outcome.outcome);
        per_sample.push_back({
            {"id", samples[i].id},
            {"outcome", winrate::outcome_name(slot.outcome.outcome)},
            {"forward", verdict_json(slot.outcome.forward)},
            {"reversed", verdict_json(slot.outcome.reversed)},
        });
    }

    json report;
    report["subcommand"] = "winrate";
    report["version"] = kVersion;
    report["seed"] = options.seed;
    report["config_digest"] = config_digest(resolved_config(options, "winrate"));
    std::size_t win = 0, draw = 0, loss = 0;
    for (const auto o : outcomes) {
        if (o == winrate::Outcome::win) ++win;
        else if (o == winrate::Outcome::draw) ++draw;
        else ++loss;
    }
    report["win"] = win;
    report["draw"] = draw;
    report["loss"] = loss;
    if (!outcomes.empty()) {
        const auto rates = winrate::aggregate_win_rate(outcomes);
        report["percentages"] = {
            {"win_pct", round3(rates.win_pct)},
            {"draw_pct", round3(rates.draw_pct)},
            {"loss_pct", round3(rates.loss_pct)},
            {"unbeaten_pct", round3(rates.unbeaten_pct())},
        };
    } else {
        report["percentages"] = nullptr;
    }
    report["per_sample"] = std::move(per_sample);
    report["skipped"] = std::move(skipped);
    report["failures"] = failures;

    return {std::move(report), failures.empty() ? kExitOk : kExitSampleFailures};
}

std::vector<std::pair<hipo::Tokens, hipo::Tokens>> builtin_hipo_corpus() {
    // Vocabulary of 10 (EOS 0, forbidden 9). Pairs 7 and 8 fight pairs 4 and
    // 1 over one bigram row each, so some samples stay hard for the whole run.
    return {
        {{1}, {2, 3, 0}},
        {{2}, {3, 4, 0}},
        {{3}, {4, 5, 0}},
        {{4}, {5, 6, 0}},
        {{5}, {6, 7, 0}},
        {{6}, {7, 8, 0}},
        {{7}, {5, 8, 0}},
        {{8}, {2, 4, 0}},
        {{1, 2}, {3, 4, 0}},
        {{3, 4}, {5, 6, 0}},
    };
}

int builtin_hipo_vocab() { return 10; }

hipo::HallucinationCheck forbidden_token_check(int token) {
    return [token](const hipo::Tokens&, const hipo::Tokens& generated) {
        return std::find(generated.begin(), generated.end(), token) != generated.end();
    };
}

RunResult run_hipo_demo(const HipoDemoOptions& demo, const RunOptions& options) {
    std::vector<std::pair<hipo::Tokens, hipo::Tokens>> corpus;
    int vocab = builtin_hipo_vocab();
    if (demo.pairs_path.empty()) {
        corpus = builtin_hipo_corpus();
    } else {
        int max_token = 0;
        for (const auto& p : hipo::load_pair_corpus(demo.pairs_path)) {
            for (const int t : p.x) max_token = std::max(max_token, t);
            for (const int t : p.y_w) max_token = std::max(max_token, t);
            corpus.emplace_back(p.x, p.y_w);
        }
        if (corpus.empty())
            throw Error(ErrorKind::EmptyInput, demo.pairs_path + " holds no pairs");
        vocab = std::max(vocab, max_token + 1);
    }

    std::filesystem::create_directories(demo.out_dir);
    const auto out_path = [&](const std::string& name) {
        return (std::filesystem::path(demo.out_dir) / name).string();
    };

    const auto model0 = hipo::ToyLM::zeros(vocab);
    const auto sft = hipo::sft_train(model0, corpus, demo.sft_learning_rate, demo.sft_steps);
    hipo::save_model(sft.model, out_path("model_sft.json"));

    hipo::HipoConfig config = demo.config;
    config.seed = options.seed != 0 ? options.seed : config.seed;

    json report;
    report["subcommand"] = "hipo-demo";
    report["version"] = kVersion;
    report["seed"] = config.seed;
    auto resolved = resolved_config(options, "hipo-demo");
    resolved["beta"] = std::to_string(config.beta);
    resolved["sim_threshold"] = std::to_string(config.sim_threshold);
    resolved["learning_rate"] = std::to_string(config.learning_rate);
    resolved["rounds"] = std::to_string(config.rounds);
    resolved["steps_per_round"] = std::to_string(config.steps_per_round);
    resolved["max_gen_len"] = std::to_string(config.max_gen_len);
    resolved["sft_steps"] = std::to_string(demo.sft_steps);
    resolved["hipo_seed"] = std::to_string(config.seed);
    report["config_digest"] = config_digest(resolved);
    report["sft"] = {
        {"steps", demo.sft_steps},
        {"initial_loss", sft.loss_history.empty() ? json(nullptr) : json(sft.loss_history.front())},
        {"final_loss", sft.loss_history.empty() ? json(nullptr) : json(sft.loss_history.back())},
    };
    report["corpus_size"] = corpus.size();

    json rounds = json::array();
    std::vector<hipo::RoundStats> stats;
    if (config.rounds > 0) {
        const auto result = hipo::hipo_iterate(sft.model, corpus, config,
                                               forbidden_token_check(vocab - 1));
        stats = result.stats;
        hipo::save_model(result.model, out_path("model_final.json"));
        report["checkpoints"] = {"model_sft.json", "model_final.json"};
    } else {
        hipo::save_model(sft.model, out_path("model_final.json"));
        report["checkpoints"] = {"model_sft.json", "model_final.json"};
    }
    for (const auto& s : stats) {
        rounds.push_back({
            {"round", s.round},
            {"train_set_size", s.train_set_size},
            {"mastered_count", s.mastered_count},
            {"mean_loss", opt_json(s.mean_loss)},
            {"mean_chosen_margin", opt_json(s.mean_chosen_margin)},
        });
    }
    report["rounds"] = std::move(rounds);
    report["stats_file"] = "hipo_stats.json";

    std::ofstream stats_out(out_path("hipo_stats.json"));
    if (!stats_out) throw Error(ErrorKind::IoError, "cannot write stats file");
    stats_out << hipo::round_stats_to_json(stats);

    return {std::move(report), kExitOk};
}

RunResult run_prep_revise(const std::string& input_path, const std::string& statutes_path,
                          const std::string& output_path, const RunOptions& options) {
    std::ifstream in(input_path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open input file: " + input_path);
    struct RawQA {
        std::string id, question, answer;
    };
    std::vector<RawQA> raws;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const json j = parse_jsonl_line(input_path, line_no, line);
        try {
            raws.push_back({j.at("id").get<std::string>(), j.at("question").get<std::string>(),
                            j.at("answer").get<std::string>()});
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError,
                        input_path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }

    const auto bundle = make_providers(options);
    const auto store = store::load_store(statutes_path, *bundle.embedder);
    const auto templates = resolve_templates(options);
    dataprep::PrepOptions prep;
    prep.check = options.check;
    prep.grammar = resolve_grammar(options);

    struct Slot {
        bool failed = false;
        std::string error;
        dataprep::QARecord record;
        dataprep::RevisionTrace trace;
    };
    std::vector<Slot> slots(raws.size());
    parallel_for(raws.size(), options.max_concurrency, [&](std::size_t i) {
        try {
            auto [record, trace] =
                dataprep::revise_answer(raws[i].id, raws[i].question, raws[i].answer, store,
                                        *bundle.chat, *bundle.embedder, prep, templates);
            slots[i].record = std::move(record);
            slots[i].trace = std::move(trace);
        } catch (const std::exception& e) {
            slots[i].failed = true;
            slots[i].error = e.what();
        }
    });

    std::vector<dataprep::QARecord> records;
    json failures = json::array();
    json trace_lines = json::array();
    std::size_t revised = 0;
    for (std::size_t i = 0; i < raws.size(); ++i) {
        if (slots[i].failed) {
            failures.push_back({{"id", raws[i].id}, {"error", slots[i].error}});
            continue;
        }
        const auto& trace = slots[i].trace;
        if (!trace.replacements.empty()) ++revised;
        json reps = json::array();
        for (const auto& r : trace.replacements)
            reps.push_back({{"citation_index", r.citation_index},
                            {"statute_id", r.statute_id},
                            {"similarity", round6(r.similarity)}});
        trace_lines.push_back({{"id", raws[i].id},
                               {"original_citations", trace.original_citations.size()},
                               {"replacements", std::move(reps)}});
        records.push_back(slots[i].record);
    }
    dataprep::save_qa_records(records, output_path);
    {
        std::ofstream trace_out(output_path + ".trace.jsonl");
        if (!trace_out) throw Error(ErrorKind::IoError, "cannot write trace file");
        for (const auto& t : trace_lines) trace_out << t.dump() << '\n';
    }

    json report;
    report["subcommand"] = "prep-revise";
    report["version"] = kVersion;
    report["config_digest"] = config_digest(resolved_config(options, "prep-revise"));
    report["processed"] = raws.size();
    report["emitted"] = records.size();
    report["revised"] = revised;
    report["failed"] = failures.size();
    report["failures"] = failures;

    return {std::move(report), failures.empty() ? kExitOk : kExitSampleFailures};
}

RunResult run_prep_genqa(const std::string& statutes_path, int per_statute,
                         const std::string& output_path, const RunOptions& options) {
    const auto bundle = make_providers(options);
    const auto store = store::load_store(statutes_path, *bundle.embedder);
    const auto templates = resolve_templates(options);
    dataprep::PrepOptions prep;
    prep.check = options.check;

    std::vector<dataprep::QARecord> records;
    json warnings = json::array();
    json failures = json::array();
    for (const auto& statute : store.statutes()) {
        try {
            const auto generated =
                dataprep::generate_questions(statute, per_statute, *bundle.chat, prep, templates);
            for (const auto& w : generated.warnings) warnings.push_back(w);
            int k = 0;
            for (const auto& question : generated.questions) {
                const std::string answer = dataprep::generate_answer_from_provision(
                    question, statute, *bundle.chat, prep, templates);
                dataprep::QARecord record;
                record.id = "q-" + std::to_string(statute.id) + "-" + std::to_string(k++);
                record.question = question;
                record.answer = answer;
                record.cited_statute_ids = {statute.id};
                record.source = dataprep::Source::provision_generated;
                records.push_back(std::move(record));
            }
        } catch (const Error& e) {
            failures.push_back({{"statute_id", statute.id}, {"error", e.what()}});
        }
    }
    dataprep::save_qa_records(records, output_path);

    json report;
    report["subcommand"] = "prep-genqa";
    report["version"] = kVersion;
    report["config_digest"] = config_digest(resolved_config(options, "prep-genqa"));
    report["statutes"] = store.size();
    report["questions"] = records.size();
    report["warnings"] = warnings;
    report["failed"] = failures.size();
    report["failures"] = failures;

    return {std::move(report), failures.empty() ? kExitOk : kExitSampleFailures};
}

RunResult run_prep_pairs(const std::string& records_path, const std::string& answers_path,
                         const std::string& output_path, int vocab_size,
                         const RunOptions& options) {
    const auto records = dataprep::load_qa_records(records_path);
    std::map<std::string, std::string> answers;
    for (const auto& r : load_outputs(answers_path)) answers[r.sample_id] = r.answer;

    std::set<std::string> record_ids;
    for (const auto& r : records) record_ids.insert(r.id);
    for (auto it = answers.begin(); it != answers.end();) {
        if (!record_ids.count(it->first)) it = answers.erase(it);
        else ++it;
    }

    const auto built =
        dataprep::build_preference_pairs(records, answers, dataprep::numeric_tokenizer(vocab_size));
    hipo::save_pair_corpus(built.pairs, output_path);

    json report;
    report["subcommand"] = "prep-pairs";
    report["version"] = kVersion;
    report["config_digest"] = config_digest(resolved_config(options, "prep-pairs"));
    report["records"] = records.size();
    report["pairs"] = built.pairs.size();
    report["warnings"] = built.warnings;

    return {std::move(report), kExitOk};
}

}  // namespace lexihal::runner
