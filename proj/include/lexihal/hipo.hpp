#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lexihal/error.hpp"
#include "lexihal/metrics.hpp"

namespace lexihal::hipo {

using Tokens = std::vector<int>;

// Token 0 is reserved as EOS for generation.
inline constexpr int kEosToken = 0;

// Bigram table language model: row v holds the next-token logits after
// token v; the extra last row is the begin-of-sequence context.
// P(y_t | y_<t) = softmax(theta[prev])[y_t].
struct ToyLM {
    int vocab_size = 0;
    std::vector<std::vector<double>> theta;  // (V+1) x V

    static ToyLM zeros(int vocab);
    int bos_row() const { return vocab_size; }
};

using Grad = std::vector<std::vector<double>>;

Grad zero_grad(int vocab);

struct SeqLogProb {
    double total = 0.0;
    std::vector<double> per_token;
};

// Log-probability of y conditioned on x: the context stream is BOS, x..., y...
// and only y's tokens are scored.
SeqLogProb seq_logprob(const ToyLM& model, const Tokens& x, const Tokens& y);

// Unnormalized sequence NLL (no length division).
double nll_loss(const ToyLM& model, const Tokens& x, const Tokens& y);

struct PreferencePair {
    Tokens x;
    Tokens y_w;
    Tokens y_l;
    int round_generated = 0;
};

struct LogProbBundle {
    double policy_w = 0.0;
    double policy_l = 0.0;
    double ref_w = 0.0;
    double ref_l = 0.0;
    int len_w = 1;
};

// indicator * (-policy_w / len_w) - log sigmoid(beta * ((policy_w - ref_w) -
// (policy_l - ref_l))): the length-normalized NLL term gated by the
// indicator plus the DPO term on the log-ratio margin.
double hipo_loss(const LogProbBundle& lp, double beta, int indicator);

// Diagnostic only: the as-printed quotient form, dividing log-probabilities
// instead of subtracting them. Never used for training.
double hipo_loss_literal_quotient(const LogProbBundle& lp, double beta, int indicator);

// Exact analytic gradient of hipo_loss with respect to theta; the reference
// model is frozen.
Grad hipo_grad(const ToyLM& model, const ToyLM& ref, const PreferencePair& pair, double beta,
               int indicator);

// Gradient of the sequence log-probability (the softmax-minus-onehot
// accumulation, with the sign of log P).
Grad score_grad(const ToyLM& model, const Tokens& x, const Tokens& y);

struct SftResult {
    ToyLM model;
    std::vector<double> loss_history;  // mean NLL at each step, pre-update
};

// Full-batch gradient descent on mean nll_loss.
SftResult sft_train(const ToyLM& model, const std::vector<std::pair<Tokens, Tokens>>& dataset,
                    double learning_rate, int steps);

enum class DecodeMode { greedy, sample };

// Autoregressive decode from (BOS, x...). Greedy breaks ties toward the
// lowest token id; sampling is seeded and platform-independent. Stops after
// max_len tokens or when EOS is produced (the EOS is kept in the output).
Tokens generate_answer(const ToyLM& model, const Tokens& x, std::uint64_t seed, int max_len,
                       DecodeMode mode);

// True when the model demonstrably hallucinated in `generated`.
using HallucinationCheck = std::function<bool(const Tokens& x, const Tokens& generated)>;

// Mastered (=> excluded from the next round) iff the generated answer is
// hallucination-free AND its similarity to y_w strictly exceeds the scorer
// threshold.
bool check_mastered(const Tokens& x, const Tokens& generated, const Tokens& y_w,
                    const HallucinationCheck& hallucination_check,
                    const metrics::SimilarityScorer& scorer);

enum class IndicatorMode { on_hallucination, always_on, always_off };

struct HipoConfig {
    double beta = 0.1;
    double sim_threshold = 0.8;
    double learning_rate = 0.5;
    int rounds = 3;
    int steps_per_round = 30;
    int max_gen_len = 8;
    std::uint64_t seed = 42;
    IndicatorMode indicator_mode = IndicatorMode::on_hallucination;
    DecodeMode decode_mode = DecodeMode::sample;
};

struct RoundStats {
    int round = 0;
    int train_set_size = 0;   // pairs trained this round (survivors after filtering)
    int mastered_count = 0;   // pairs newly filtered out this round
    std::optional<double> mean_loss;  // mean HIPO loss at the last step
    // beta * [(log P_now(y_w) - log P_start(y_w)) - (log P_now(y_l) - log P_start(y_l))]
    // averaged over the round's training set; P_start is the model that
    // entered the iterative stage, so rounds accumulate rather than reset.
    std::optional<double> mean_chosen_margin;
};

struct IterateResult {
    ToyLM model;
    std::vector<RoundStats> stats;
};

// The iterative loop: per round, generate a rejected answer for every
// surviving pair with the previous model, drop mastered pairs, then train on
// the rest with the previous model as the frozen reference. Returns early
// (with stats) once every pair is mastered.
IterateResult hipo_iterate(const ToyLM& model0,
                           const std::vector<std::pair<Tokens, Tokens>>& sft_pairs,
                           const HipoConfig& config,
                           const HallucinationCheck& hallucination_check);

// "5 2 7" -- the textual form fed to similarity scorers.
std::string tokens_to_text(const Tokens& tokens);

// Checkpoint: {"vocab_size": int, "theta": [[number]]}
void save_model(const ToyLM& model, const std::string& path);
ToyLM load_model(const std::string& path);

// Pair corpus: JSON Lines {"x": [int], "y_w": [int], "y_l"?: [int]}
std::vector<PreferencePair> load_pair_corpus(const std::string& path);
void save_pair_corpus(const std::vector<PreferencePair>& pairs, const std::string& path);

std::string round_stats_to_json(const std::vector<RoundStats>& stats);

}  // namespace lexihal::hipo
