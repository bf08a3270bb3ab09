#include "lexihal/statute_store.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <utility>

#include <json.hpp>

#include "lexihal/text.hpp"

namespace lexihal::store {

using nlohmann::json;

namespace {

int digit_value(char32_t cp) {
    if (cp >= U'0' && cp <= U'9') return static_cast<int>(cp - U'0');
    switch (cp) {
        case U'零': case U'〇': return 0;
        case U'一': return 1;
        case U'二': case U'两': return 2;
        case U'三': return 3;
        case U'四': return 4;
        case U'五': return 5;
        case U'六': return 6;
        case U'七': return 7;
        case U'八': return 8;
        case U'九': return 9;
        default: return -1;
    }
}

std::int64_t place_value(char32_t cp) {
    switch (cp) {
        case U'十': return 10;
        case U'百': return 100;
        case U'千': return 1000;
        default: return 0;
    }
}

}  // namespace

bool is_numeral_cp(char32_t cp) {
    return digit_value(cp) >= 0 || place_value(cp) > 0 || cp == U'万';
}

std::optional<std::int64_t> chinese_numeral_to_int(const std::string& numeral) {
    const auto cps = text::decode_utf8(numeral);
    if (cps.empty()) return std::nullopt;
    std::int64_t total = 0;    // completed 万 groups
    std::int64_t section = 0;  // value below 万
    std::int64_t number = 0;   // pending digit(s)
    bool any = false;
    for (const auto& c : cps) {
        const char32_t cp = text::fold_fullwidth(c.cp);
        const int d = digit_value(cp);
        if (d >= 0) {
            number = number * 10 + d;
            any = true;
            continue;
        }
        const std::int64_t place = place_value(cp);
        if (place > 0) {
            section += (number == 0 ? 1 : number) * place;
            number = 0;
            any = true;
            continue;
        }
        if (cp == U'万') {
            total += (section + (number == 0 && section == 0 ? 1 : number)) * 10000;
            section = 0;
            number = 0;
            any = true;
            continue;
        }
        return std::nullopt;
    }
    if (!any) return std::nullopt;
    const std::int64_t value = total + section + number;
    if (value > 99999) return std::nullopt;  // bounded by real statute numbering
    return value;
}

std::string normalize_article_number(const std::string& raw) {
    if (text::trim(raw).empty()) throw Error(ErrorKind::EmptyInput, "article number is blank");

    // Fold fullwidth forms so e.g. "３０２" behaves like "302".
    std::string folded;
    for (const auto& c : text::decode_utf8(raw)) folded += text::encode_utf8(text::fold_fullwidth(c.cp));

    const auto cps = text::decode_utf8(folded);
    const auto numeral_run = [&](std::size_t start) -> std::pair<std::string, std::size_t> {
        std::string run;
        std::size_t i = start;
        while (i < cps.size() && is_numeral_cp(cps[i].cp)) {
            run += text::encode_utf8(cps[i].cp);
            ++i;
        }
        return {run, i};
    };

    // Find the first numeral code point; everything before it is ordinal
    // dressing ("第", "Article", "Section", ...).
    std::size_t pos = 0;
    while (pos < cps.size() && !is_numeral_cp(cps[pos].cp)) ++pos;
    if (pos == cps.size())
        throw Error(ErrorKind::Unparseable, "no numeral in article number: " + raw);

    auto [main_run, after_main] = numeral_run(pos);
    const auto main_value = chinese_numeral_to_int(main_run);
    if (!main_value)
        throw Error(ErrorKind::Unparseable, "cannot parse numeral '" + main_run + "' in: " + raw);

    std::optional<std::int64_t> sub;
    std::size_t i = after_main;
    const auto try_sub_at = [&](std::size_t j) -> std::size_t {
        // "-n" or "之n" immediately after the current position.
        if (j < cps.size() && (cps[j].cp == U'-' || cps[j].cp == U'之')) {
            auto [sub_run, after_sub] = numeral_run(j + 1);
            const auto v = chinese_numeral_to_int(sub_run);
            if (v) {
                sub = v;
                return after_sub;
            }
        }
        return j;
    };
    i = try_sub_at(i);
    if (i < cps.size() && cps[i].cp == U'条') ++i;
    if (!sub) i = try_sub_at(i);

    std::string out = std::to_string(*main_value);
    if (sub) out += "-" + std::to_string(*sub);
    return out;
}

StatuteStore::StatuteStore(std::vector<Statute> statutes, const providers::Embedder& embedder)
    : statutes_(std::move(statutes)) {
    std::vector<std::string> contents;
    contents.reserve(statutes_.size());
    for (const auto& s : statutes_) contents.push_back(s.content);
    if (!contents.empty()) index_ = embedder.embed(contents);
}

const Statute* StatuteStore::by_id(std::int64_t id) const {
    for (const auto& s : statutes_)
        if (s.id == id) return &s;
    return nullptr;
}

MatchResult StatuteStore::find_best_match(const std::string& query_text,
                                          const providers::Embedder& embedder) const {
    if (empty()) throw Error(ErrorKind::EmptyStore, "cannot match against an empty store");
    if (text::trim(query_text).empty()) throw Error(ErrorKind::EmptyInput, "query text is blank");
    const auto query = embedder.embed_one(query_text);

    const Statute* best = nullptr;
    double best_sim = 0.0;
    for (std::size_t i = 0; i < statutes_.size(); ++i) {
        const double sim = providers::cosine(query, index_[i]);
        if (!best || sim > best_sim || (sim == best_sim && statutes_[i].id < best->id)) {
            best = &statutes_[i];
            best_sim = sim;
        }
    }
    return {best, std::clamp(best_sim, -1.0, 1.0)};
}

std::vector<Statute> parse_statutes_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open statute file: " + path);

    std::vector<Statute> statutes;
    std::map<std::pair<std::string, std::string>, int> seen;  // (name, number) -> line
    std::set<std::int64_t> seen_ids;
    std::string line;
    int line_no = 0;
    std::int64_t next_id = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        Statute s;
        try {
            s.law_name = j.at("law_name").get<std::string>();
            s.article_number = normalize_article_number(j.at("article_number").get<std::string>());
            s.content = j.at("content").get<std::string>();
            if (j.contains("aliases"))
                for (const auto& a : j.at("aliases")) s.aliases.insert(a.get<std::string>());
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (s.law_name.empty())
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": empty law_name");
        if (s.content.empty())
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": empty content");
        s.aliases.insert(s.law_name);
        if (j.contains("id") && !j.at("id").is_null()) {
            s.id = j.at("id").get<std::int64_t>();
            if (s.id < 0)
                throw Error(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": negative id");
        } else {
            s.id = next_id;
        }
        next_id = std::max(next_id, s.id + 1);

        const auto key = std::make_pair(s.law_name, s.article_number);
        if (auto it = seen.find(key); it != seen.end())
            throw Error(ErrorKind::DuplicateStatute,
                        "(" + s.law_name + ", " + s.article_number + ") on lines " +
                            std::to_string(it->second) + " and " + std::to_string(line_no));
        if (!seen_ids.insert(s.id).second)
            throw Error(ErrorKind::ParseError,
                        path + ":" + std::to_string(line_no) + ": duplicate id " + std::to_string(s.id));
        seen.emplace(key, line_no);
        statutes.push_back(std::move(s));
    }
    if (statutes.empty()) throw Error(ErrorKind::EmptyStore, path + " contains no statutes");
    return statutes;
}

StatuteStore load_store(const std::string& path, const providers::Embedder& embedder) {
    return StatuteStore(parse_statutes_jsonl(path), embedder);
}

std::string statutes_to_jsonl(const std::vector<Statute>& statutes) {
    std::string out;
    for (const auto& s : statutes) {
        json j;
        j["id"] = s.id;
        j["law_name"] = s.law_name;
        j["aliases"] = s.aliases;
        j["article_number"] = s.article_number;
        j["content"] = s.content;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_statutes(const std::vector<Statute>& statutes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write statute file: " + path);
    out << statutes_to_jsonl(statutes);
}

}  // namespace lexihal::store
