#pragma once

#include <string>
#include <vector>

#include "lexihal/prompts.hpp"
#include "lexihal/providers.hpp"

namespace lexihal::winrate {

enum class Preference { first, second, tie };
enum class Outcome { win, draw, loss };

const char* preference_name(Preference p);
const char* outcome_name(Outcome o);

// Rubric anchors: helpfulness in {0,2,4}, relevance and completeness in
// {0,1,2}. No interpolation accepted.
struct DimScores {
    int helpfulness = 0;
    int relevance = 0;
    int completeness = 0;
    int total() const { return helpfulness + relevance + completeness; }
};

// One judged ordering: both candidates' score triples plus the preference,
// which is always derived from the totals, never taken from free text.
struct JudgeVerdict {
    DimScores first;
    DimScores second;
    Preference preferred = Preference::tie;
};

struct PairOutcome {
    Outcome outcome = Outcome::draw;  // for answer A vs answer B
    JudgeVerdict forward;             // judged as (a, b)
    JudgeVerdict reversed;            // judged as (b, a)
};

// Issues the rubric prompt at temperature 0 and parses the final
// "SCORES A: h,r,c" / "SCORES B: h,r,c" block.
JudgeVerdict judge_pair(const std::string& question, const std::string& first,
                        const std::string& second, const providers::ChatProvider& chat,
                        const prompts::TemplateSet& templates = prompts::builtin());

// Position-swap protocol: A wins only when both orderings prefer A's slot;
// any disagreement or tie is a draw.
PairOutcome debiased_compare(const std::string& question, const std::string& a,
                             const std::string& b, const providers::ChatProvider& chat,
                             const prompts::TemplateSet& templates = prompts::builtin());

struct WinRates {
    double win_pct = 0.0;
    double draw_pct = 0.0;
    double loss_pct = 0.0;

    double unbeaten_pct() const { return 100.0 - loss_pct; }
};

WinRates aggregate_win_rate(const std::vector<PairOutcome>& outcomes);
WinRates aggregate_win_rate(const std::vector<Outcome>& outcomes);

}  // namespace lexihal::winrate
