#include "lexihal/winrate.hpp"

#include <cctype>

#include "lexihal/error.hpp"
#include "lexihal/text.hpp"

namespace lexihal::winrate {

const char* preference_name(Preference p) {
    switch (p) {
        case Preference::first: return "first";
        case Preference::second: return "second";
        case Preference::tie: return "tie";
    }
    return "tie";
}

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::win: return "win";
        case Outcome::draw: return "draw";
        case Outcome::loss: return "loss";
    }
    return "draw";
}

namespace {

// Parses "SCORES <label>: h,r,c" and checks each value against the rubric's
// discrete anchors.
DimScores parse_block(const std::string& reply, const std::string& label) {
    const std::string key = "SCORES " + label;
    std::size_t pos = reply.find(key);
    if (pos == std::string::npos)
        throw Error(ErrorKind::ScoreParseError, "judge reply lacks '" + key + "' block");
    std::size_t i = pos + key.size();
    while (i < reply.size() && (reply[i] == ' ' || reply[i] == ':')) ++i;

    int values[3] = {0, 0, 0};
    for (int k = 0; k < 3; ++k) {
        while (i < reply.size() && (reply[i] == ' ' || reply[i] == ',')) ++i;
        std::size_t j = i;
        while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) ++j;
        if (j == i)
            throw Error(ErrorKind::ScoreParseError,
                        "'" + key + "' block does not hold three integers");
        values[k] = std::stoi(reply.substr(i, j - i));
        i = j;
    }

    DimScores s{values[0], values[1], values[2]};
    if (s.helpfulness != 0 && s.helpfulness != 2 && s.helpfulness != 4)
        throw Error(ErrorKind::OutOfRangeScore,
                    "helpfulness must be 0, 2 or 4; got " + std::to_string(s.helpfulness));
    if (s.relevance < 0 || s.relevance > 2)
        throw Error(ErrorKind::OutOfRangeScore,
                    "relevance must be 0, 1 or 2; got " + std::to_string(s.relevance));
    if (s.completeness < 0 || s.completeness > 2)
        throw Error(ErrorKind::OutOfRangeScore,
                    "completeness must be 0, 1 or 2; got " + std::to_string(s.completeness));
    return s;
}

}  // namespace

JudgeVerdict judge_pair(const std::string& question, const std::string& first,
                        const std::string& second, const providers::ChatProvider& chat,
                        const prompts::TemplateSet& templates) {
    if (text::trim(question).empty() || text::trim(first).empty() || text::trim(second).empty())
        throw Error(ErrorKind::EmptyInput, "judge_pair needs question and both answers");

    providers::ChatRequest req;
    req.temperature = 0.0;  // the judge runs deterministically
    req.prompt = prompts::fill(
        templates.pairwise_rubric,
        {{"QUESTION", question}, {"ANSWER_A", first}, {"ANSWER_B", second}});
    const std::string reply = chat.chat(req).text;

    JudgeVerdict v;
    v.first = parse_block(reply, "A");
    v.second = parse_block(reply, "B");
    if (v.first.total() > v.second.total()) v.preferred = Preference::first;
    else if (v.first.total() < v.second.total()) v.preferred = Preference::second;
    else v.preferred = Preference::tie;
    return v;
}

PairOutcome debiased_compare(const std::string& question, const std::string& a,
                             const std::string& b, const providers::ChatProvider& chat,
                             const prompts::TemplateSet& templates) {
    PairOutcome out;
    out.forward = judge_pair(question, a, b, chat, templates);
    out.reversed = judge_pair(question, b, a, chat, templates);

    const bool a_both = out.forward.preferred == Preference::first &&
                        out.reversed.preferred == Preference::second;
    const bool b_both = out.forward.preferred == Preference::second &&
                        out.reversed.preferred == Preference::first;
    out.outcome = a_both ? Outcome::win : b_both ? Outcome::loss : Outcome::draw;
    return out;
}

WinRates aggregate_win_rate(const std::vector<Outcome>& outcomes) {
    if (outcomes.empty())
        throw Error(ErrorKind::EmptyInput, "aggregate_win_rate needs at least one outcome");
    std::size_t win = 0, draw = 0, loss = 0;
    for (const auto o : outcomes) {
        if (o == Outcome::win) ++win;
        else if (o == Outcome::draw) ++draw;
        else ++loss;
    }
    const double n = static_cast<double>(outcomes.size());
    return {100.0 * win / n, 100.0 * draw / n, 100.0 * loss / n};
}

WinRates aggregate_win_rate(const std::vector<PairOutcome>& outcomes) {
    std::vector<Outcome> plain;
    plain.reserve(outcomes.size());
    for (const auto& o : outcomes) plain.push_back(o.outcome);
    return aggregate_win_rate(plain);
}

}  // namespace lexihal::winrate
