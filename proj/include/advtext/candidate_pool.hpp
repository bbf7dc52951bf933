#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advtext/text_pipeline.hpp"

namespace advtext {

enum class CandidateSource { synonym, typo, keyword };

std::string_view to_string(CandidateSource source);
std::optional<CandidateSource> parse_candidate_source(std::string_view name);

struct CandidateEntry {
  std::string surface;
  PosTag pos = PosTag::other;
  CandidateSource source = CandidateSource::synonym;
  std::optional<std::size_t> keyword_class;  // set iff source == keyword

  friend bool operator==(const CandidateEntry&, const CandidateEntry&) = default;
};

// Per class, the surfaces that occur in that class's training documents and
// in no other class (compared case-insensitively, first-seen casing kept).
using KeywordsByClass = std::vector<std::set<std::string>>;

KeywordsByClass extract_class_keywords(std::span<const Document> train, std::size_t num_classes);

struct CandidatePool {
  // Lowercased source word -> synonym and typo entries.
  std::map<std::string, std::vector<CandidateEntry>> by_word;
  KeywordsByClass keywords_by_class;
  // Tagged keyword entries per class, alphabetical.
  std::vector<std::vector<CandidateEntry>> keyword_entries;

  friend bool operator==(const CandidatePool&, const CandidatePool&) = default;
};

// Word lists: "<word>\t<w1>,<w2>,..." per line.
using WordListFile = std::map<std::string, std::vector<std::string>>;
WordListFile load_word_list(const std::filesystem::path& path);

CandidatePool build_pool(const WordListFile& synonyms, const WordListFile& typos,
                         const KeywordsByClass& keywords, const PosLexicon& lexicon);
CandidatePool build_pool(const std::filesystem::path& synonym_file,
                         const std::filesystem::path& typo_file, const KeywordsByClass& keywords,
                         const PosLexicon& lexicon);

// Entries for word.surface whose POS equals word.pos (synonyms, then typos,
// each alphabetical), followed by target_class keywords with the same POS.
std::vector<CandidateEntry> candidates_for(const CandidatePool& pool, const Token& word,
                                           std::optional<std::size_t> target_class = std::nullopt);

}  // namespace advtext
