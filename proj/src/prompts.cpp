#include "lexihal/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace lexihal::prompts {

namespace {

TemplateSet make_builtin() {
    TemplateSet t;

    t.statute_extraction = R"([EXTRACT-STATUTES] You are given an answer to a legal question. List every
legal provision the answer cites, one line per provision, exactly in the form
《LAW NAME》第NUMBER条：CONTENT
Leave out the ：CONTENT part when the answer does not quote the provision text.
If the answer cites no provision at all, output exactly NONE.

Answer:
{ANSWER}
)";

    t.suggestion_extraction = R"([EXTRACT-SUGGESTIONS] You are given an answer to a legal question. Extract
every piece of advice or recommended course of action it gives, as a numbered
list (1. ..., 2. ...), one item per line, each item short and faithful to the
answer. If the answer gives no advice, output exactly NONE.

Answer:
{ANSWER}
)";

    t.relevance_direct = R"([REL-DIRECT] Rate how relevant the knowledge in the statute below is to the
question, as an integer from 0 (unrelated) to 10 (directly on point).
Reply with exactly one line: score: <integer>

Question:
{QUESTION}

Statute:
{STATUTE}
)";

    t.relevance_reference = R"([REL-REFERENCE] The statute cited in an answer contains inaccuracies. Compare
the knowledge points of the cited statute with the reference statute below and
rate, as an integer from 0 to 10, how much correct legal knowledge relevant to
the question the cited statute still conveys.
Reply with exactly one line: score: <integer>

Question:
{QUESTION}

Cited statute:
{STATUTE}

Reference statute:
{REFERENCE}
)";

    t.claim_legality = R"([CLAIM-LEGALITY] Rate the legality of the suggestion below, given the
question, as an integer from 0 (clearly contradicts the law) to 5 (fully
lawful). Reply with exactly one line: score: <integer>

Question:
{QUESTION}

Suggestion:
{SUGGESTION}
)";

    t.pairwise_rubric = R"([PAIRWISE-RUBRIC] Compare the two candidate answers to the legal question
below. Reason step by step: analyze each dimension for both answers, then give
the scores, then total them.

Dimensions:
- Helpfulness (0, 2 or 4 points): 4 if the answer positively and proactively
  solves the inquirer's question; 2 if it partially solves it; 0 if it is
  unrelated or does not help.
- Relevance to legal regulations (0, 1 or 2 points): 2 if the provisions cited
  in the answer directly and strongly support its suggestions; 1 if they
  support them only indirectly, or if the answer cites no provisions at all;
  0 if the provisions are completely unrelated to the question. Do not judge
  whether the provisions are real, only their relevance.
- Completeness (0, 1 or 2 points): 2 if the answer addresses every aspect of
  the question; 1 if it covers some aspects; 0 if it is scattered and does not
  cover the aspects the question aims to solve.

Question:
{QUESTION}

Answer A:
{ANSWER_A}

Answer B:
{ANSWER_B}

End your reply with exactly two lines:
SCORES A: helpfulness,relevance,completeness
SCORES B: helpfulness,relevance,completeness
)";

    t.question_generation = R"([GEN-QUESTIONS] Act as a law professor. Design {N} distinct questions that
can be answered based on the legal provision below. Each question must
describe a concrete situation rather than a bare query, be answerable within
the provision, and be phrased in natural modern Chinese. Vary the style across
questions (first-person subjective, first-person neutral, colloquial).
Output a numbered list (1. ..., 2. ...), one question per line.

Provision:
{STATUTE}
)";

    t.answer_generation = R"([GEN-ANSWER] Act as a legal expert. First clarify what the question is
asking, then answer it using the provision below, citing the provision in the
form 《LAW NAME》第NUMBER条：CONTENT. If the provision does not fully cover the
question, supplement the answer with relevant general information to make it
complete and useful.

Question:
{QUESTION}

Provision:
{STATUTE}
)";

    t.answer_revision = R"([REVISE-ANSWER] The answer below cites legal provisions incorrectly. Rewrite
the answer so that it cites the real provisions given below instead, each in
the form 《LAW NAME》第NUMBER条：CONTENT, keeping the rest of the advice intact.

Real provisions:
{STATUTES}

Answer:
{ANSWER}
)";

    t.relevance_precheck = R"([REL-PRECHECK] Is the statute below relevant to the question? Reply with
exactly one line: answer: yes or answer: no

Question:
{QUESTION}

Statute:
{STATUTE}
)";

    return t;
}

std::string read_if_exists(const std::filesystem::path& p, const std::string& fallback) {
    std::ifstream in(p);
    if (!in) return fallback;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

const TemplateSet& builtin() {
    static const TemplateSet t = make_builtin();
    return t;
}

TemplateSet load_overrides(const std::string& dir) {
    TemplateSet t = builtin();
    const std::filesystem::path d(dir);
    t.statute_extraction = read_if_exists(d / "statute_extraction.txt", t.statute_extraction);
    t.suggestion_extraction = read_if_exists(d / "suggestion_extraction.txt", t.suggestion_extraction);
    t.relevance_direct = read_if_exists(d / "relevance_direct.txt", t.relevance_direct);
    t.relevance_reference = read_if_exists(d / "relevance_reference.txt", t.relevance_reference);
    t.claim_legality = read_if_exists(d / "claim_legality.txt", t.claim_legality);
    t.pairwise_rubric = read_if_exists(d / "pairwise_rubric.txt", t.pairwise_rubric);
    t.question_generation = read_if_exists(d / "question_generation.txt", t.question_generation);
    t.answer_generation = read_if_exists(d / "answer_generation.txt", t.answer_generation);
    t.answer_revision = read_if_exists(d / "answer_revision.txt", t.answer_revision);
    t.relevance_precheck = read_if_exists(d / "relevance_precheck.txt", t.relevance_precheck);
    return t;
}

std::string fill(const std::string& tpl, const std::map<std::string, std::string>& values) {
    std::string out = tpl;
    for (const auto& [key, value] : values) {
        const std::string slot = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = out.find(slot, pos)) != std::string::npos) {
            out.replace(pos, slot.size(), value);
            pos += value.size();
        }
    }
    return out;
}

}  // namespace lexihal::prompts
