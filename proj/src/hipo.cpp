#include "lexihal/hipo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace lexihal::hipo {

using nlohmann::json;

ToyLM ToyLM::zeros(int vocab) {
    if (vocab <= 0) throw Error(ErrorKind::InvalidArgument, "vocab_size must be positive");
    ToyLM m;
    m.vocab_size = vocab;
    m.theta.assign(static_cast<std::size_t>(vocab) + 1,
                   std::vector<double>(static_cast<std::size_t>(vocab), 0.0));
    return m;
}

Grad zero_grad(int vocab) {
    return Grad(static_cast<std::size_t>(vocab) + 1,
                std::vector<double>(static_cast<std::size_t>(vocab), 0.0));
}

namespace {

void check_tokens(const Tokens& tokens, int vocab, const char* what) {
    for (const int t : tokens)
        if (t < 0 || t >= vocab)
            throw Error(ErrorKind::TokenOutOfRange, std::string(what) + " token " +
                                                        std::to_string(t) + " outside [0," +
                                                        std::to_string(vocab) + ")");
}

// log softmax of one row, evaluated at every position.
std::vector<double> log_softmax(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (const double l : logits) z += std::exp(l - m);
    const double log_z = m + std::log(z);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
    return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    auto out = log_softmax(logits);
    for (auto& v : out) v = std::exp(v);
    return out;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// -log sigmoid(z), stable for large |z|.
double neg_log_sigmoid(double z) {
    if (z >= 0.0) return std::log1p(std::exp(-z));
    return -z + std::log1p(std::exp(z));
}

// splitmix64: cheap, well-mixed, platform-independent.
std::uint64_t mix64(std::uint64_t v) {
    v += 0x9E3779B97F4A7C15ULL;
    v = (v ^ (v >> 30)) * 0xBF58476D1CE4E5B9ULL;
    v = (v ^ (v >> 27)) * 0x94D049BB133111EBULL;
    return v ^ (v >> 31);
}

struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        return mix64(state);
    }
    double uniform() {  // in [0, 1)
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }
};

}  // namespace

SeqLogProb seq_logprob(const ToyLM& model, const Tokens& x, const Tokens& y) {
    if (y.empty()) throw Error(ErrorKind::EmptyInput, "seq_logprob needs a non-empty target");
    check_tokens(x, model.vocab_size, "context");
    check_tokens(y, model.vocab_size, "target");

    SeqLogProb out;
    out.per_token.reserve(y.size());
    int prev = x.empty() ? model.bos_row() : x.back();
    for (const int t : y) {
        const auto lp = log_softmax(model.theta[static_cast<std::size_t>(prev)]);
        out.per_token.push_back(lp[static_cast<std::size_t>(t)]);
        out.total += lp[static_cast<std::size_t>(t)];
        prev = t;
    }
    return out;
}

double nll_loss(const ToyLM& model, const Tokens& x, const Tokens& y) {
    return -seq_logprob(model, x, y).total;
}

namespace {

void check_bundle(const LogProbBundle& lp) {
    if (lp.policy_w > 0.0 || lp.policy_l > 0.0 || lp.ref_w > 0.0 || lp.ref_l > 0.0)
        throw Error(ErrorKind::InvalidLogProb, "log-probabilities must be <= 0");
    if (lp.len_w < 1) throw Error(ErrorKind::InvalidArgument, "len_w must be >= 1");
}

}  // namespace

double hipo_loss(const LogProbBundle& lp, double beta, int indicator) {
    check_bundle(lp);
    const double margin = (lp.policy_w - lp.ref_w) - (lp.policy_l - lp.ref_l);
    const double nll_term = indicator ? -lp.policy_w / static_cast<double>(lp.len_w) : 0.0;
    return nll_term + neg_log_sigmoid(beta * margin);
}

double hipo_loss_literal_quotient(const LogProbBundle& lp, double beta, int indicator) {
    check_bundle(lp);
    const double z = beta * (lp.policy_w / lp.ref_w) - beta * (lp.policy_l / lp.ref_l);
    const double nll_term = indicator ? -lp.policy_w / static_cast<double>(lp.len_w) : 0.0;
    return nll_term + neg_log_sigmoid(z);
}

Grad score_grad(const ToyLM& model, const Tokens& x, const Tokens& y) {
    if (y.empty()) throw Error(ErrorKind::EmptyInput, "score_grad needs a non-empty target");
    check_tokens(x, model.vocab_size, "context");
    check_tokens(y, model.vocab_size, "target");

    Grad g = zero_grad(model.vocab_size);
    int prev = x.empty() ? model.bos_row() : x.back();
    for (const int t : y) {
        const auto p = softmax(model.theta[static_cast<std::size_t>(prev)]);
        auto& row = g[static_cast<std::size_t>(prev)];
        for (int j = 0; j < model.vocab_size; ++j) row[static_cast<std::size_t>(j)] -= p[static_cast<std::size_t>(j)];
        row[static_cast<std::size_t>(t)] += 1.0;
        prev = t;
    }
    return g;
}

namespace {

void add_scaled(Grad& acc, const Grad& g, double scale) {
    for (std::size_t i = 0; i < acc.size(); ++i)
        for (std::size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += scale * g[i][j];
}

}  // namespace

Grad hipo_grad(const ToyLM& model, const ToyLM& ref, const PreferencePair& pair, double beta,
               int indicator) {
    if (pair.y_w.empty()) throw Error(ErrorKind::EmptyInput, "pair has empty chosen answer");
    const double policy_w = seq_logprob(model, pair.x, pair.y_w).total;
    const double policy_l = seq_logprob(model, pair.x, pair.y_l).total;
    const double ref_w = seq_logprob(ref, pair.x, pair.y_w).total;
    const double ref_l = seq_logprob(ref, pair.x, pair.y_l).total;

    const Grad g_w = score_grad(model, pair.x, pair.y_w);
    const Grad g_l = score_grad(model, pair.x, pair.y_l);

    const double z = beta * ((policy_w - ref_w) - (policy_l - ref_l));
    // d/dz of -log sigmoid(z) is sigmoid(z) - 1.
    const double dpo_weight = (sigmoid(z) - 1.0) * beta;

    Grad grad = zero_grad(model.vocab_size);
    if (indicator)
        add_scaled(grad, g_w, -1.0 / static_cast<double>(pair.y_w.size()));
    add_scaled(grad, g_w, dpo_weight);
    add_scaled(grad, g_l, -dpo_weight);
    return grad;
}

SftResult sft_train(const ToyLM& model, const std::vector<std::pair<Tokens, Tokens>>& dataset,
                    double learning_rate, int steps) {
    if (dataset.empty()) throw Error(ErrorKind::EmptyInput, "sft_train needs a non-empty dataset");
    if (learning_rate <= 0.0)
        throw Error(ErrorKind::InvalidArgument, "learning rate must be positive");

    SftResult result;
    result.model = model;
    const double n = static_cast<double>(dataset.size());
    for (int step = 0; step < steps; ++step) {
        double loss = 0.0;
        Grad grad = zero_grad(result.model.vocab_size);
        for (const auto& [x, y] : dataset) {
            loss += nll_loss(result.model, x, y);
            // gradient of NLL is the negated score gradient
            add_scaled(grad, score_grad(result.model, x, y), -1.0 / n);
        }
        loss /= n;
        if (!std::isfinite(loss))
            throw Error(ErrorKind::DivergenceDetected,
                        "SFT loss became non-finite at step " + std::to_string(step));
        result.loss_history.push_back(loss);
        for (std::size_t i = 0; i < result.model.theta.size(); ++i)
            for (std::size_t j = 0; j < result.model.theta[i].size(); ++j)
                result.model.theta[i][j] -= learning_rate * grad[i][j];
    }
    return result;
}

Tokens generate_answer(const ToyLM& model, const Tokens& x, std::uint64_t seed, int max_len,
                       DecodeMode mode) {
    if (max_len < 1) throw Error(ErrorKind::InvalidArgument, "max_len must be >= 1");
    check_tokens(x, model.vocab_size, "context");

    Rng rng(seed);
    Tokens out;
    int prev = x.empty() ? model.bos_row() : x.back();
    for (int step = 0; step < max_len; ++step) {
        const auto& row = model.theta[static_cast<std::size_t>(prev)];
        int token = 0;
        if (mode == DecodeMode::greedy) {
            for (int j = 1; j < model.vocab_size; ++j)
                if (row[static_cast<std::size_t>(j)] > row[static_cast<std::size_t>(token)])
                    token = j;  // strict > keeps the lowest id on ties
        } else {
            const auto p = softmax(row);
            const double u = rng.uniform();
            double cum = 0.0;
            token = model.vocab_size - 1;
            for (int j = 0; j < model.vocab_size; ++j) {
                cum += p[static_cast<std::size_t>(j)];
                if (u < cum) {
                    token = j;
                    break;
                }
            }
        }
        out.push_back(token);
        if (token == kEosToken) break;
        prev = token;
    }
    return out;
}

std::string tokens_to_text(const Tokens& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(tokens[i]);
    }
    return out;
}

bool check_mastered(const Tokens& x, const Tokens& generated, const Tokens& y_w,
                    const HallucinationCheck& hallucination_check,
                    const metrics::SimilarityScorer& scorer) {
    if (hallucination_check(x, generated)) return false;
    const double sim = scorer.score(tokens_to_text(generated), tokens_to_text(y_w));
    return sim > scorer.threshold;  // strict: "exceeds" the threshold
}

IterateResult hipo_iterate(const ToyLM& model0,
                           const std::vector<std::pair<Tokens, Tokens>>& sft_pairs,
                           const HipoConfig& config,
                           const HallucinationCheck& hallucination_check) {
    if (sft_pairs.empty())
        throw Error(ErrorKind::EmptyInput, "hipo_iterate needs a non-empty pair set");
    if (config.beta <= 0.0) throw Error(ErrorKind::InvalidArgument, "beta must be positive");
    if (config.sim_threshold < 0.0 || config.sim_threshold > 1.0)
        throw Error(ErrorKind::InvalidArgument, "sim_threshold must be in [0,1]");

    metrics::SimilarityScorer scorer;
    scorer.kind = metrics::SimilarityScorer::Kind::token_f1;
    scorer.threshold = config.sim_threshold;

    IterateResult result;
    result.model = model0;

    std::vector<std::size_t> survivors(sft_pairs.size());
    std::iota(survivors.begin(), survivors.end(), std::size_t{0});

    for (int round = 1; round <= config.rounds; ++round) {
        const ToyLM ref = result.model;  // frozen copy of the previous round's model

        // (a) generate a rejected answer for every surviving pair
        std::vector<PreferencePair> pairs;
        std::vector<std::size_t> still_hard;
        int mastered = 0;
        for (const std::size_t idx : survivors) {
            const auto& [x, y_w] = sft_pairs[idx];
            const std::uint64_t gen_seed =
                mix64(config.seed ^ (static_cast<std::uint64_t>(round) << 32) ^
                      static_cast<std::uint64_t>(idx));
            const Tokens y_l =
                generate_answer(ref, x, gen_seed, config.max_gen_len, config.decode_mode);

            // (b) mastered pairs leave the pool for good
            if (check_mastered(x, y_l, y_w, hallucination_check, scorer)) {
                ++mastered;
                continue;
            }
            still_hard.push_back(idx);

            PreferencePair pair;
            pair.x = x;
            pair.y_w = y_w;
            pair.y_l = y_l;
            pair.round_generated = round;
            pairs.push_back(std::move(pair));
        }
        survivors = still_hard;

        RoundStats stats;
        stats.round = round;
        stats.train_set_size = static_cast<int>(pairs.size());
        stats.mastered_count = mastered;

        if (pairs.empty()) {  // every sample mastered: stop early, not a failure
            result.stats.push_back(stats);
            break;
        }

        // (c) indicator per pair
        std::vector<int> indicators(pairs.size(), 0);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            switch (config.indicator_mode) {
                case IndicatorMode::on_hallucination:
                    indicators[i] = hallucination_check(pairs[i].x, pairs[i].y_l) ? 1 : 0;
                    break;
                case IndicatorMode::always_on: indicators[i] = 1; break;
                case IndicatorMode::always_off: indicators[i] = 0; break;
            }
        }

        // (d) full-batch gradient descent on mean hipo_loss, reference frozen
        const double n = static_cast<double>(pairs.size());
        double last_loss = 0.0;
        for (int step = 0; step < config.steps_per_round; ++step) {
            double loss = 0.0;
            Grad grad = zero_grad(result.model.vocab_size);
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                const auto& pair = pairs[i];
                LogProbBundle lp;
                lp.policy_w = seq_logprob(result.model, pair.x, pair.y_w).total;
                lp.policy_l = seq_logprob(result.model, pair.x, pair.y_l).total;
                lp.ref_w = seq_logprob(ref, pair.x, pair.y_w).total;
                lp.ref_l = seq_logprob(ref, pair.x, pair.y_l).total;
                lp.len_w = static_cast<int>(pair.y_w.size());
                loss += hipo_loss(lp, config.beta, indicators[i]);
                add_scaled(grad, hipo_grad(result.model, ref, pair, config.beta, indicators[i]),
                           1.0 / n);
            }
            loss /= n;
            if (!std::isfinite(loss))
                throw Error(ErrorKind::DivergenceDetected,
                            "HIPO loss became non-finite in round " + std::to_string(round));
            last_loss = loss;
            for (std::size_t i = 0; i < result.model.theta.size(); ++i)
                for (std::size_t j = 0; j < result.model.theta[i].size(); ++j)
                    result.model.theta[i][j] -= config.learning_rate * grad[i][j];
        }

        // Margin bookkeeping baselines on the model that entered the stage,
        // so the per-round numbers telescope instead of resetting to zero:
        // the training loss above still references the previous round's model.
        double margin_sum = 0.0;
        for (const auto& pair : pairs) {
            const double w_ratio = seq_logprob(result.model, pair.x, pair.y_w).total -
                                   seq_logprob(model0, pair.x, pair.y_w).total;
            const double l_ratio = seq_logprob(result.model, pair.x, pair.y_l).total -
                                   seq_logprob(model0, pair.x, pair.y_l).total;
            margin_sum += config.beta * (w_ratio - l_ratio);
        }
        if (config.steps_per_round > 0) stats.mean_loss = last_loss;
        stats.mean_chosen_margin = margin_sum / n;
        result.stats.push_back(stats);
    }
    return result;
}

void save_model(const ToyLM& model, const std::string& path) {
    json j;
    j["vocab_size"] = model.vocab_size;
    j["theta"] = model.theta;
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write model checkpoint: " + path);
    out << j.dump(2) << '\n';
}

ToyLM load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open model checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, path + ": " + e.what());
    }
    ToyLM m;
    try {
        m.vocab_size = j.at("vocab_size").get<int>();
        m.theta = j.at("theta").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, path + ": " + e.what());
    }
    if (m.vocab_size <= 0 || m.theta.size() != static_cast<std::size_t>(m.vocab_size) + 1)
        throw Error(ErrorKind::ParseError, path + ": theta must have vocab_size+1 rows");
    for (const auto& row : m.theta) {
        if (row.size() != static_cast<std::size_t>(m.vocab_size))
            throw Error(ErrorKind::ParseError, path + ": theta row width != vocab_size");
        for (const double v : row)
            if (!std::isfinite(v))
                throw Error(ErrorKind::ParseError, path + ": theta has non-finite entries");
    }
    return m;
}

std::vector<PreferencePair> load_pair_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open pair corpus: " + path);
    std::vector<PreferencePair> pairs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        PreferencePair p;
        try {
            p.x = j.at("x").get<Tokens>();
            p.y_w = j.at("y_w").get<Tokens>();
            if (j.contains("y_l")) p.y_l = j.at("y_l").get<Tokens>();
            p.round_generated = j.value("round_generated", 0);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (p.y_w.empty())
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": empty y_w");
        pairs.push_back(std::move(p));
    }
    return pairs;
}

void save_pair_corpus(const std::vector<PreferencePair>& pairs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write pair corpus: " + path);
    for (const auto& p : pairs) {
        json j;
        j["x"] = p.x;
        j["y_w"] = p.y_w;
        if (!p.y_l.empty()) j["y_l"] = p.y_l;
        if (p.round_generated != 0) j["round_generated"] = p.round_generated;
        out << j.dump() << '\n';
    }
}

std::string round_stats_to_json(const std::vector<RoundStats>& stats) {
    json arr = json::array();
    for (const auto& s : stats) {
        json j;
        j["round"] = s.round;
        j["train_set_size"] = s.train_set_size;
        j["mastered_count"] = s.mastered_count;
        j["mean_loss"] = s.mean_loss ? json(*s.mean_loss) : json(nullptr);
        j["mean_chosen_margin"] = s.mean_chosen_margin ? json(*s.mean_chosen_margin) : json(nullptr);
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

}  // namespace lexihal::hipo
