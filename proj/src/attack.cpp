#include "duwak/attack.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "duwak/rand.hpp"

namespace duwak {

namespace {

constexpr std::uint64_t kTagAttack = 0x41545441434B2D53ULL;  // "ATTACK-S"
constexpr std::uint64_t kStreamSelect = 1;
constexpr std::uint64_t kStreamChoice = 2;
constexpr std::uint64_t kStreamCharPos = 3;
constexpr std::uint64_t kStreamLetter = 4;

struct AttackRng {
    std::uint64_t key;
    double draw(std::uint64_t stream, std::size_t position) const { return u01(key, mix64(stream), position); }
};

AttackRng rng_for(const AttackSpec& spec) {
    return {derive_subkey(spec.attack_seed, kTagAttack ^ static_cast<std::uint64_t>(spec.kind))};
}

std::size_t pick(double u, std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n))); }

const char* qwerty_neighbours(char c) {
    switch (c) {
        case 'q': return "wa";
        case 'w': return "qeas";
        case 'e': return "wrsd";
        case 'r': return "etdf";
        case 't': return "ryfg";
        case 'y': return "tugh";
        case 'u': return "yihj";
        case 'i': return "uojk";
        case 'o': return "ipkl";
        case 'p': return "ol";
        case 'a': return "qwsz";
        case 's': return "weadzx";
        case 'd': return "erfsxc";
        case 'f': return "rtgdcv";
        case 'g': return "tyhfvb";
        case 'h': return "yujgbn";
        case 'j': return "uikhnm";
        case 'k': return "iolmj";
        case 'l': return "opk";
        case 'z': return "asx";
        case 'x': return "zsdc";
        case 'c': return "xdfv";
        case 'v': return "cfgb";
        case 'b': return "vghn";
        case 'n': return "bhjm";
        case 'm': return "njk";
    }
    return "";
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

TokenId lookup(const Vocabulary& vocab, const std::string& word, const std::string& path) {
    if (!vocab.contains(word)) {
        throw Error(Errc::invalid_argument, path + ": token '" + word + "' is not in the vocabulary");
    }
    return vocab.id(word);
}

std::vector<std::vector<std::string>> read_rules(const std::string& path, std::size_t min_fields,
                                                 std::size_t max_fields) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::missing_map, "cannot open map file " + path);
    std::vector<std::vector<std::string>> rules;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        if (fields.size() < min_fields || fields.size() > max_fields) {
            throw Error(Errc::invalid_argument, path + ":" + std::to_string(lineno) + ": wrong field count");
        }
        rules.push_back(std::move(fields));
    }
    return rules;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::io_error, "cannot write " + path);
    return out;
}

const Vocabulary& need_vocab(const AttackMaps& maps, AttackKind k) {
    if (maps.vocab == nullptr) throw Error(Errc::missing_map, std::string(to_string(k)) + " needs a vocabulary");
    return *maps.vocab;
}

std::string language_name(const std::string& code) {
    if (code == "fr") return "French";
    if (code == "ru") return "Russian";
    if (code == "de") return "German";
    if (code == "es") return "Spanish";
    if (code == "zh") return "Chinese";
    return code;
}

// Character edit shared by Misspelling and Typo. Returns the edited string, or
// the input when no letter can be edited.
std::string edit_word(const std::string& word, bool keyboard, const AttackRng& rng, std::size_t position) {
    std::vector<std::size_t> letters;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (is_alpha(word[i]) && (!keyboard || *qwerty_neighbours(lower(word[i])) != '\0')) letters.push_back(i);
    }
    if (letters.empty()) return word;
    const std::size_t at = letters[pick(rng.draw(kStreamCharPos, position), letters.size())];
    const char orig = word[at];
    const bool was_upper = orig != lower(orig);
    char repl;
    if (keyboard) {
        const std::string_view nb = qwerty_neighbours(lower(orig));
        repl = nb[pick(rng.draw(kStreamLetter, position), nb.size())];
    } else {
        const int base = lower(orig) - 'a';
        const int shift = 1 + static_cast<int>(pick(rng.draw(kStreamLetter, position), 25));
        repl = static_cast<char>('a' + (base + shift) % 26);
    }
    std::string out = word;
    out[at] = was_upper ? upper(repl) : repl;
    return out;
}

}  // namespace

const char* to_string(AttackKind k) {
    switch (k) {
        case AttackKind::None: return "None";
        case AttackKind::Contraction: return "Contraction";
        case AttackKind::Lowercase: return "Lowercase";
        case AttackKind::RepetitionDeletion: return "RepetitionDeletion";
        case AttackKind::Misspelling: return "Misspelling";
        case AttackKind::Swap: return "Swap";
        case AttackKind::Synonym: return "Synonym";
        case AttackKind::Typo: return "Typo";
        case AttackKind::ExternalRewrite: return "ExternalRewrite";
    }
    return "?";
}

AttackKind parse_attack_kind(std::string_view name) {
    for (auto k : {AttackKind::None, AttackKind::Contraction, AttackKind::Lowercase, AttackKind::RepetitionDeletion,
                   AttackKind::Misspelling, AttackKind::Swap, AttackKind::Synonym, AttackKind::Typo,
                   AttackKind::ExternalRewrite}) {
        if (name == to_string(k)) return k;
    }
    if (name == "TypoAttack") return AttackKind::Typo;
    throw Error(Errc::invalid_argument, "unknown attack '" + std::string(name) + "'");
}

bool is_parametric(AttackKind k) {
    return k == AttackKind::Misspelling || k == AttackKind::Swap || k == AttackKind::Synonym || k == AttackKind::Typo;
}

void AttackSpec::validate() const {
    if (is_parametric(kind) != intensity.has_value()) {
        throw Error(Errc::invalid_argument, std::string(to_string(kind)) + (is_parametric(kind)
                                                                                ? " requires an intensity"
                                                                                : " takes no intensity"));
    }
    if (intensity && !(*intensity >= 0.0 && *intensity <= 1.0)) {
        throw Error(Errc::invalid_argument, "attack intensity must lie in [0,1]");
    }
    if (kind == AttackKind::ExternalRewrite && mode != "paraphrase" && mode.rfind("roundtrip:", 0) != 0) {
        throw Error(Errc::invalid_argument, "rewrite mode must be 'paraphrase' or 'roundtrip:<lang>'");
    }
}

std::string AttackSpec::label() const {
    std::string out = to_string(kind);
    if (intensity) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "@%g", *intensity);
        out += buf;
    }
    if (kind == AttackKind::ExternalRewrite) out += ":" + mode;
    return out;
}

AttackSpec AttackSpec::parse(std::string_view label, std::uint64_t attack_seed) {
    AttackSpec spec;
    spec.attack_seed = attack_seed;
    std::string_view head = label;
    if (auto colon = label.find(':'); colon != std::string_view::npos) {
        head = label.substr(0, colon);
        spec.mode = std::string(label.substr(colon + 1));
    }
    if (auto at = head.find('@'); at != std::string_view::npos) {
        const std::string num(head.substr(at + 1));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(num, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != num.size() || num.empty()) throw Error(Errc::invalid_argument, "bad intensity in '" + num + "'");
        spec.intensity = v;
        head = head.substr(0, at);
    }
    spec.kind = parse_attack_kind(head);
    spec.validate();
    return spec;
}

bool is_editable_word(std::string_view token) {
    if (token.size() < 2 || token == Vocabulary::unk_token) return false;
    return std::all_of(token.begin(), token.end(), [](char c) { return is_alpha(c) || c == '\''; }) &&
           std::any_of(token.begin(), token.end(), is_alpha);
}

SynonymMap nearest_neighbour_synonyms(const LanguageModel& model) {
    const Vocabulary& vocab = model.vocab();
    std::vector<TokenId> words;
    for (TokenId n = 1; n < vocab.size(); ++n) {
        if (is_editable_word(vocab.token(n))) words.push_back(n);
    }
    SynonymMap map;
    for (TokenId a : words) {
        const auto ha = model.hidden(a);
        TokenId best = a;
        double best_cos = -std::numeric_limits<double>::infinity();
        for (TokenId b : words) {
            if (b == a) continue;
            const double c = dot(ha, model.hidden(b));
            if (c > best_cos) {
                best_cos = c;
                best = b;
            }
        }
        if (best != a) map.entries[a] = {best};
    }
    return map;
}

ContractionMap builtin_contraction_map(const Vocabulary& vocab) {
    ContractionMap map;
    for (const auto& rule : builtin_contractions()) {
        if (vocab.contains(rule.first) && vocab.contains(rule.second) && vocab.contains(rule.merged)) {
            map.entries[{vocab.id(rule.first), vocab.id(rule.second)}] = vocab.id(rule.merged);
        }
    }
    return map;
}

CaseFoldMap builtin_casefold_map(const Vocabulary& vocab) {
    CaseFoldMap map;
    for (TokenId n = 1; n < vocab.size(); ++n) {
        const std::string& t = vocab.token(n);
        std::string low = t;
        std::transform(low.begin(), low.end(), low.begin(), lower);
        if (low != t && vocab.contains(low)) map.entries[n] = vocab.id(low);
    }
    return map;
}

SynonymMap load_synonym_map(const std::string& path, const Vocabulary& vocab) {
    SynonymMap map;
    for (const auto& f : read_rules(path, 2, std::numeric_limits<std::size_t>::max())) {
        auto& out = map.entries[lookup(vocab, f[0], path)];
        for (std::size_t i = 1; i < f.size(); ++i) out.push_back(lookup(vocab, f[i], path));
    }
    return map;
}

ContractionMap load_contraction_map(const std::string& path, const Vocabulary& vocab) {
    ContractionMap map;
    for (const auto& f : read_rules(path, 3, 3)) {
        map.entries[{lookup(vocab, f[0], path), lookup(vocab, f[1], path)}] = lookup(vocab, f[2], path);
    }
    return map;
}

CaseFoldMap load_casefold_map(const std::string& path, const Vocabulary& vocab) {
    CaseFoldMap map;
    for (const auto& f : read_rules(path, 2, 2)) map.entries[lookup(vocab, f[0], path)] = lookup(vocab, f[1], path);
    return map;
}

void save_synonym_map(const std::string& path, const SynonymMap& map, const Vocabulary& vocab) {
    std::vector<TokenId> keys;
    for (const auto& [k, _] : map.entries) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    auto out = open_out(path);
    for (TokenId k : keys) {
        out << vocab.token(k);
        for (TokenId r : map.entries.at(k)) out << '\t' << vocab.token(r);
        out << '\n';
    }
}

void save_contraction_map(const std::string& path, const ContractionMap& map, const Vocabulary& vocab) {
    auto out = open_out(path);
    for (const auto& [pair, merged] : map.entries) {
        out << vocab.token(pair.first) << '\t' << vocab.token(pair.second) << '\t' << vocab.token(merged) << '\n';
    }
}

void save_casefold_map(const std::string& path, const CaseFoldMap& map, const Vocabulary& vocab) {
    std::vector<std::pair<TokenId, TokenId>> rows(map.entries.begin(), map.entries.end());
    std::sort(rows.begin(), rows.end());
    auto out = open_out(path);
    for (const auto& [from, to] : rows) out << vocab.token(from) << '\t' << vocab.token(to) << '\n';
}

std::string paraphrase_prompt(const std::string& text) {
    return "Paraphrase the following text. Keep its meaning and length. Reply with the paraphrase only.\n\n" + text;
}

std::string translate_prompt(const std::string& text, const std::string& target_language) {
    return "Translate the following text into " + target_language + ". Reply with the translation only.\n\n" + text;
}

TokenSeq apply_attack(const TokenSeq& input, const AttackSpec& spec, const AttackMaps& maps) {
    spec.validate();
    const auto& in = input.tokens;
    TokenSeq out{{}, Origin::attacked};
    auto& t = out.tokens;
    const AttackRng rng = rng_for(spec);
    const double q = spec.intensity.value_or(0.0);

    switch (spec.kind) {
        case AttackKind::None:
            t = in;
            break;
        case AttackKind::Contraction: {
            if (maps.contractions == nullptr) throw Error(Errc::missing_map, "Contraction needs a contraction map");
            const auto& m = maps.contractions->entries;
            for (std::size_t i = 0; i < in.size(); ++i) {
                if (i + 1 < in.size()) {
                    if (auto it = m.find({in[i], in[i + 1]}); it != m.end()) {
                        t.push_back(it->second);
                        ++i;
                        continue;
                    }
                }
                t.push_back(in[i]);
            }
            break;
        }
        case AttackKind::Lowercase: {
            if (maps.casefold == nullptr) throw Error(Errc::missing_map, "Lowercase needs a casefold map");
            const auto& m = maps.casefold->entries;
            t.reserve(in.size());
            for (TokenId x : in) {
                auto it = m.find(x);
                t.push_back(it == m.end() ? x : it->second);
            }
            break;
        }
        case AttackKind::RepetitionDeletion:
            t.reserve(in.size() + in.size() / 8);
            for (std::size_t i = 0; i < in.size(); ++i) {
                const double u = rng.draw(kStreamSelect, i);
                if (u < kDeletionRate) continue;
                t.push_back(in[i]);
                if (u < kDeletionRate + kRepetitionRate) t.push_back(in[i]);
            }
            break;
        case AttackKind::Misspelling:
        case AttackKind::Typo: {
            const Vocabulary& vocab = need_vocab(maps, spec.kind);
            const bool keyboard = spec.kind == AttackKind::Typo;
            t.reserve(in.size());
            for (std::size_t i = 0; i < in.size(); ++i) {
                const std::string& word = vocab.token(in[i]);
                if (!is_editable_word(word) || !(rng.draw(kStreamSelect, i) < q)) {
                    t.push_back(in[i]);
                    continue;
                }
                const auto pieces = tokenize(edit_word(word, keyboard, rng, i), vocab).tokens;
                // A letter substitution never splits a word, so exactly one piece comes back.
                t.push_back(pieces.size() == 1 ? pieces[0] : Vocabulary::unk_id);
            }
            break;
        }
        case AttackKind::Swap: {
            t = in;
            for (std::size_t i = 0; i + 1 < t.size();) {
                if (rng.draw(kStreamSelect, i) < q) {
                    std::swap(t[i], t[i + 1]);
                    i += 2;
                } else {
                    ++i;
                }
            }
            break;
        }
        case AttackKind::Synonym: {
            if (maps.synonyms == nullptr) throw Error(Errc::missing_map, "Synonym needs a synonym map");
            const auto& m = maps.synonyms->entries;
            t = in;
            for (std::size_t i = 0; i < t.size(); ++i) {
                auto it = m.find(t[i]);
                if (it == m.end() || it->second.empty()) continue;
                if (rng.draw(kStreamSelect, i) < q) t[i] = it->second[pick(rng.draw(kStreamChoice, i), it->second.size())];
            }
            break;
        }
        case AttackKind::ExternalRewrite: {
            const Vocabulary& vocab = need_vocab(maps, spec.kind);
            if (maps.rewriter == nullptr) throw Error(Errc::attack_unavailable, "no rewrite client configured");
            std::string text = detokenize(in, vocab);
            if (spec.mode == "paraphrase") {
                text = maps.rewriter->complete(paraphrase_prompt(text));
            } else {
                const std::string lang = language_name(spec.mode.substr(std::string("roundtrip:").size()));
                text = maps.rewriter->complete(translate_prompt(text, lang));
                text = maps.rewriter->complete(translate_prompt(text, "English"));
            }
            t = tokenize(text, vocab).tokens;
            break;
        }
    }
    return out;
}

std::vector<AttackSpec> attack_grid(std::uint64_t attack_seed, bool include_external) {
    auto plain = [&](AttackKind k) { return AttackSpec{k, std::nullopt, attack_seed, {}}; };
    auto with = [&](AttackKind k, double q) { return AttackSpec{k, q, attack_seed, {}}; };
    std::vector<AttackSpec> grid = {
        plain(AttackKind::None),
        plain(AttackKind::Contraction),
        plain(AttackKind::Lowercase),
        plain(AttackKind::RepetitionDeletion),
        with(AttackKind::Misspelling, 0.25),
        with(AttackKind::Misspelling, 0.50),
        with(AttackKind::Swap, 0.05),
        with(AttackKind::Swap, 0.10),
        with(AttackKind::Synonym, 0.25),
        with(AttackKind::Synonym, 0.50),
        with(AttackKind::Synonym, 0.75),
        with(AttackKind::Synonym, 1.00),
        with(AttackKind::Typo, 0.05),
        with(AttackKind::Typo, 0.10),
    };
    if (include_external) {
        grid.push_back({AttackKind::ExternalRewrite, std::nullopt, attack_seed, "paraphrase"});
        grid.push_back({AttackKind::ExternalRewrite, std::nullopt, attack_seed, "roundtrip:fr"});
        grid.push_back({AttackKind::ExternalRewrite, std::nullopt, attack_seed, "roundtrip:ru"});
    }
    return grid;
}

}  // namespace duwak
