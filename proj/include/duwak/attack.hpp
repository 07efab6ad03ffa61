#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "duwak/client.hpp"
#include "duwak/core.hpp"
#include "duwak/lm.hpp"

namespace duwak {

enum class AttackKind {
    None,
    Contraction,
    Lowercase,
    RepetitionDeletion,
    Misspelling,
    Swap,
    Synonym,
    Typo,
    ExternalRewrite,
};

const char* to_string(AttackKind k);
AttackKind parse_attack_kind(std::string_view name);
// True for the kinds that take an intensity: Misspelling, Swap, Synonym, Typo.
bool is_parametric(AttackKind k);

struct AttackSpec {
    AttackKind kind = AttackKind::None;
    std::optional<double> intensity;
    std::uint64_t attack_seed = 0;
    // ExternalRewrite only: "paraphrase" or "roundtrip:<lang>".
    std::string mode;

    // Throws Errc::invalid_argument when intensity presence does not match the kind.
    void validate() const;
    // "Synonym@0.25", "Contraction", "ExternalRewrite:roundtrip:fr".
    std::string label() const;
    // Inverse of label(); the seed is not part of the label.
    static AttackSpec parse(std::string_view label, std::uint64_t attack_seed = 0);

    friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

struct SynonymMap {
    std::unordered_map<TokenId, std::vector<TokenId>> entries;
};

struct ContractionMap {
    std::map<std::pair<TokenId, TokenId>, TokenId> entries;
};

struct CaseFoldMap {
    std::unordered_map<TokenId, TokenId> entries;  // absent ids map to themselves
};

// Each word token paired with its nearest-embedding word token.
SynonymMap nearest_neighbour_synonyms(const LanguageModel& model);
ContractionMap builtin_contraction_map(const Vocabulary& vocab);
CaseFoldMap builtin_casefold_map(const Vocabulary& vocab);

// Tab-separated rule files, one rule per line; '#' starts a comment line.
//   synonym:     word <TAB> replacement [<TAB> replacement ...]
//   contraction: first <TAB> second <TAB> merged
//   casefold:    from <TAB> to
SynonymMap load_synonym_map(const std::string& path, const Vocabulary& vocab);
ContractionMap load_contraction_map(const std::string& path, const Vocabulary& vocab);
CaseFoldMap load_casefold_map(const std::string& path, const Vocabulary& vocab);
void save_synonym_map(const std::string& path, const SynonymMap& map, const Vocabulary& vocab);
void save_contraction_map(const std::string& path, const ContractionMap& map, const Vocabulary& vocab);
void save_casefold_map(const std::string& path, const CaseFoldMap& map, const Vocabulary& vocab);

struct AttackMaps {
    const Vocabulary* vocab = nullptr;  // needed by Misspelling, Typo and ExternalRewrite
    const SynonymMap* synonyms = nullptr;
    const ContractionMap* contractions = nullptr;
    const CaseFoldMap* casefold = nullptr;
    const ChatClient* rewriter = nullptr;
};

inline constexpr double kRepetitionRate = 0.05;
inline constexpr double kDeletionRate = 0.05;

// Tokens eligible for character edits: alphabetic words of length >= 2 (not UNK).
bool is_editable_word(std::string_view token);

TokenSeq apply_attack(const TokenSeq& tokens, const AttackSpec& spec, const AttackMaps& maps);

// Post-editing attack rows in table order. External rewrites come last and only
// when `include_external` is set.
std::vector<AttackSpec> attack_grid(std::uint64_t attack_seed, bool include_external = false);

std::string paraphrase_prompt(const std::string& text);
std::string translate_prompt(const std::string& text, const std::string& target_language);

}  // namespace duwak
