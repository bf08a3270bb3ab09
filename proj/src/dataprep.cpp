#include "lexihal/dataprep.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lexihal/text.hpp"

namespace lexihal::dataprep {

using nlohmann::json;

const char* source_name(Source s) {
    return s == Source::revised_public ? "revised_public" : "provision_generated";
}

namespace {

struct CheckedCitations {
    std::vector<metrics::StatuteCheck> checks;
    std::vector<std::size_t> failing;  // indices of checks that fail
};

CheckedCitations run_checks(const std::vector<extraction::ExtractedCitation>& citations,
                            const store::StatuteStore& store,
                            const providers::Embedder& embedder,
                            const metrics::CheckConfig& config) {
    CheckedCitations out;
    for (std::size_t i = 0; i < citations.size(); ++i) {
        out.checks.push_back(metrics::check_statute(citations[i], store, embedder, config));
        if (!out.checks.back().non_hallucinated()) out.failing.push_back(i);
    }
    return out;
}

std::vector<std::int64_t> cited_ids(const std::vector<metrics::StatuteCheck>& checks) {
    std::vector<std::int64_t> ids;
    for (const auto& c : checks) ids.push_back(c.best_id);
    return ids;
}

bool precheck_relevant(const std::string& question, const store::Statute& statute,
                       const providers::ChatProvider& chat,
                       const prompts::TemplateSet& templates) {
    providers::ChatRequest req;
    req.temperature = 0.0;
    req.prompt = prompts::fill(
        templates.relevance_precheck,
        {{"QUESTION", question}, {"STATUTE", extraction::render_citation(statute)}});
    std::string reply = chat.chat(req).text;
    std::transform(reply.begin(), reply.end(), reply.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (reply.find("answer: yes") != std::string::npos) return true;
    if (reply.find("answer: no") != std::string::npos) return false;
    throw Error(ErrorKind::ScoreParseError, "precheck reply lacks 'answer: yes/no'");
}

}  // namespace

std::pair<QARecord, RevisionTrace> revise_answer(
    const std::string& id, const std::string& question, const std::string& raw_answer,
    const store::StatuteStore& store, const providers::ChatProvider& chat,
    const providers::Embedder& embedder, const PrepOptions& options,
    const prompts::TemplateSet& templates) {
    if (raw_answer.empty()) throw Error(ErrorKind::EmptyInput, "raw answer is empty");
    if (store.empty()) throw Error(ErrorKind::EmptyStore, "revision needs a statute store");

    QARecord record;
    record.id = id;
    record.question = question;
    record.source = Source::revised_public;

    RevisionTrace trace;
    trace.original_citations = extraction::extract_citations(raw_answer, options.grammar);

    if (trace.original_citations.empty()) {  // nothing cited, nothing to fix
        record.answer = raw_answer;
        trace.revised_answer = raw_answer;
        return {record, trace};
    }

    auto checked = run_checks(trace.original_citations, store, embedder, options.check);
    if (checked.failing.empty()) {
        record.answer = raw_answer;
        record.cited_statute_ids = cited_ids(checked.checks);
        trace.revised_answer = raw_answer;
        return {record, trace};
    }

    // Replacement targets: the best-match statute of each failing citation.
    std::string statutes_text;
    std::set<std::int64_t> used;
    for (const std::size_t idx : checked.failing) {
        const auto& check = checked.checks[idx];
        const store::Statute* best = store.by_id(check.best_id);
        trace.replacements.push_back({idx, check.best_id, check.best_similarity});
        if (best && used.insert(best->id).second) {
            if (!statutes_text.empty()) statutes_text += '\n';
            statutes_text += extraction::render_citation(*best);
        }
        if (best && options.relevance_precheck &&
            !precheck_relevant(question, *best, chat, templates))
            throw Error(ErrorKind::RevisionFailed,
                        id + ": matched statute judged irrelevant to the question");
    }

    std::string current = raw_answer;
    for (int attempt = 0; attempt < 2; ++attempt) {
        providers::ChatRequest req;
        req.temperature = 0.0;
        req.prompt = prompts::fill(templates.answer_revision,
                                   {{"STATUTES", statutes_text}, {"ANSWER", current}});
        const std::string revised = chat.chat(req).text;
        const auto new_citations = extraction::extract_citations(revised, options.grammar);
        const auto rechecked = run_checks(new_citations, store, embedder, options.check);
        if (rechecked.failing.empty()) {
            record.answer = revised;
            record.cited_statute_ids = cited_ids(rechecked.checks);
            trace.revised_answer = revised;
            return {record, trace};
        }
        current = revised;
    }
    throw Error(ErrorKind::RevisionFailed,
                id + ": revised answer still fails statute checks after one retry");
}

GeneratedQuestions generate_questions(const store::Statute& provision, int n,
                                      const providers::ChatProvider& chat,
                                      const PrepOptions& options,
                                      const prompts::TemplateSet& templates) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "question count must be >= 1");

    providers::ChatRequest req;
    req.temperature = options.generation_temperature;
    req.prompt = prompts::fill(templates.question_generation,
                               {{"STATUTE", extraction::render_citation(provision)},
                                {"N", std::to_string(n)}});
    const auto items = extraction::parse_numbered_list(chat.chat(req).text);

    GeneratedQuestions out;
    for (const auto& q : items) {
        if (text::count_code_points(q) < options.min_question_chars) {
            out.warnings.push_back("dropped question below " +
                                   std::to_string(options.min_question_chars) +
                                   " characters: " + q);
            continue;
        }
        if (out.questions.size() < static_cast<std::size_t>(n)) {
            out.questions.push_back(q);
        } else {
            out.warnings.push_back("dropped surplus question: " + q);
        }
    }
    if (out.questions.empty())
        throw Error(ErrorKind::AllQuestionsFiltered,
                    "every generated question fell below the length floor");
    if (out.questions.size() < static_cast<std::size_t>(n))
        out.warnings.push_back("requested " + std::to_string(n) + " questions, kept " +
                               std::to_string(out.questions.size()));
    return out;
}

std::string generate_answer_from_provision(const std::string& question,
                                           const store::Statute& provision,
                                           const providers::ChatProvider& chat,
                                           const PrepOptions& options,
                                           const prompts::TemplateSet& templates) {
    if (question.empty()) throw Error(ErrorKind::EmptyInput, "question is empty");

    for (int attempt = 0; attempt < 2; ++attempt) {
        providers::ChatRequest req;
        req.temperature = options.generation_temperature;
        req.prompt = prompts::fill(templates.answer_generation,
                                   {{"QUESTION", question},
                                    {"STATUTE", extraction::render_citation(provision)}});
        const std::string answer = chat.chat(req).text;

        const auto citations = extraction::extract_citations(answer, options.grammar);
        if (citations.empty()) continue;  // grounded answers must cite
        bool all_ok = true;
        for (const auto& citation : citations) {
            metrics::StatuteCheck check;
            check.citation = citation;
            check.best_id = provision.id;
            check.best_similarity = 1.0;  // flags only; fabrication label is moot here
            metrics::apply_flags(check, provision, options.check);
            if (!check.non_hallucinated()) {
                all_ok = false;
                break;
            }
        }
        if (all_ok) return answer;
    }
    throw Error(ErrorKind::ValidationFailed,
                "generated answer does not cite the given provision correctly after retry");
}

Tokenizer numeric_tokenizer(int vocab_size) {
    if (vocab_size < 2)
        throw Error(ErrorKind::InvalidArgument, "tokenizer vocab must be at least 2");
    return [vocab_size](const std::string& s) {
        hipo::Tokens tokens;
        std::istringstream ss(s);
        std::string word;
        while (ss >> word) {
            bool numeric = !word.empty();
            for (const char c : word)
                if (!std::isdigit(static_cast<unsigned char>(c))) {
                    numeric = false;
                    break;
                }
            if (numeric) {
                const long v = std::strtol(word.c_str(), nullptr, 10);
                if (v >= 0 && v < vocab_size) {
                    tokens.push_back(static_cast<int>(v));
                    continue;
                }
            }
            tokens.push_back(1 + static_cast<int>(text::fnv1a64(word) %
                                                  static_cast<std::uint64_t>(vocab_size - 1)));
        }
        return tokens;
    };
}

BuiltPairs build_preference_pairs(const std::vector<QARecord>& sft_records,
                                  const std::map<std::string, std::string>& model_answers,
                                  const Tokenizer& tokenizer) {
    std::set<std::string> record_ids;
    for (const auto& r : sft_records) record_ids.insert(r.id);
    for (const auto& [id, _] : model_answers)
        if (!record_ids.count(id))
            throw Error(ErrorKind::InvalidArgument,
                        "model answer for unknown record id: " + id);

    BuiltPairs out;
    for (const auto& record : sft_records) {
        auto it = model_answers.find(record.id);
        if (it == model_answers.end()) {
            out.warnings.push_back("no model answer for record " + record.id + "; skipped");
            continue;
        }
        hipo::PreferencePair pair;
        pair.x = tokenizer(record.question);
        pair.y_w = tokenizer(record.answer);
        pair.y_l = tokenizer(it->second);
        pair.round_generated = 0;
        if (pair.y_w.empty()) {
            out.warnings.push_back("record " + record.id + " tokenized to an empty y_w; skipped");
            continue;
        }
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

std::vector<QARecord> load_qa_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open QA records: " + path);
    std::vector<QARecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        QARecord r;
        try {
            r.id = j.at("id").get<std::string>();
            r.question = j.at("question").get<std::string>();
            r.answer = j.at("answer").get<std::string>();
            if (j.contains("cited_statute_ids"))
                r.cited_statute_ids = j.at("cited_statute_ids").get<std::vector<std::int64_t>>();
            if (j.contains("source"))
                r.source = j.at("source").get<std::string>() == "provision_generated"
                               ? Source::provision_generated
                               : Source::revised_public;
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        records.push_back(std::move(r));
    }
    return records;
}

void save_qa_records(const std::vector<QARecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write QA records: " + path);
    for (const auto& r : records) {
        json j;
        j["id"] = r.id;
        j["question"] = r.question;
        j["answer"] = r.answer;
        j["cited_statute_ids"] = r.cited_statute_ids;
        j["source"] = source_name(r.source);
        out << j.dump() << '\n';
    }
}

}  // namespace lexihal::dataprep
