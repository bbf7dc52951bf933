#include "advtext/candidate_pool.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

namespace advtext {

namespace {

constexpr std::string_view kBlank = " \t";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(kBlank);
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(kBlank) - first + 1);
}

bool same_word(std::string_view a, std::string_view b) { return to_lower(a) == to_lower(b); }

void sort_by_surface(std::vector<CandidateEntry>& entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const CandidateEntry& a, const CandidateEntry& b) {
                     return a.surface < b.surface;
                   });
}

}  // namespace

std::string_view to_string(CandidateSource source) {
  switch (source) {
    case CandidateSource::synonym: return "synonym";
    case CandidateSource::typo: return "typo";
    case CandidateSource::keyword: return "keyword";
  }
  return "synonym";
}

std::optional<CandidateSource> parse_candidate_source(std::string_view name) {
  if (name == "synonym") return CandidateSource::synonym;
  if (name == "typo") return CandidateSource::typo;
  if (name == "keyword") return CandidateSource::keyword;
  return std::nullopt;
}

KeywordsByClass extract_class_keywords(std::span<const Document> train, std::size_t num_classes) {
  struct Occurrence {
    std::string first_surface;
    std::set<std::size_t> classes;
  };
  std::unordered_map<std::string, Occurrence> seen;
  std::vector<std::string> order;
  for (const Document& doc : train) {
    if (doc.label >= num_classes) {
      throw std::invalid_argument("extract_class_keywords: label " + std::to_string(doc.label) +
                                  " out of range in " + doc.source_id);
    }
    for (const Token& token : doc.tokens) {
      std::string key = to_lower(token.surface);
      auto [it, inserted] = seen.try_emplace(key, Occurrence{token.surface, {}});
      if (inserted) order.push_back(std::move(key));
      it->second.classes.insert(doc.label);
    }
  }
  KeywordsByClass keywords(num_classes);
  for (const std::string& key : order) {
    const Occurrence& occ = seen.at(key);
    if (occ.classes.size() == 1) keywords[*occ.classes.begin()].insert(occ.first_surface);
  }
  return keywords;
}

WordListFile load_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  WordListFile lists;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path.string(), line_no, "expected \"<word>\\t<w1>,<w2>,...\"");
    }
    const std::string_view word = trim(std::string_view(line).substr(0, tab));
    if (word.empty() || word.find(' ') != std::string_view::npos) {
      throw ParseError(path.string(), line_no, "source word must be a single non-empty token");
    }
    std::vector<std::string>& targets = lists[std::string(word)];
    std::string_view rest = std::string_view(line).substr(tab + 1);
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view item = trim(rest.substr(0, comma));
      if (item.empty() || item.find(' ') != std::string_view::npos) {
        throw ParseError(path.string(), line_no, "empty or multi-word entry in list");
      }
      targets.emplace_back(item);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  return lists;
}

CandidatePool build_pool(const WordListFile& synonyms, const WordListFile& typos,
                         const KeywordsByClass& keywords, const PosLexicon& lexicon) {
  CandidatePool pool;
  const auto add_entries = [&](const WordListFile& list, CandidateSource source) {
    for (const auto& [word, targets] : list) {
      const PosTag word_pos = tag_word(word, lexicon);
      std::vector<CandidateEntry>& entries = pool.by_word[to_lower(word)];
      for (const std::string& target : targets) {
        if (same_word(target, word)) continue;
        const bool duplicate =
            std::any_of(entries.begin(), entries.end(),
                        [&](const CandidateEntry& e) { return e.surface == target; });
        if (duplicate) continue;
        // A typo is not a dictionary word; it takes the POS of the word it misspells.
        const PosTag pos = source == CandidateSource::typo ? word_pos : tag_word(target, lexicon);
        entries.push_back(CandidateEntry{target, pos, source, std::nullopt});
      }
    }
  };
  add_entries(synonyms, CandidateSource::synonym);
  add_entries(typos, CandidateSource::typo);
  for (auto& [word, entries] : pool.by_word) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const CandidateEntry& a, const CandidateEntry& b) {
                       if (a.source != b.source) return a.source < b.source;
                       return a.surface < b.surface;
                     });
  }
  std::erase_if(pool.by_word, [](const auto& kv) { return kv.second.empty(); });

  pool.keywords_by_class = keywords;
  pool.keyword_entries.resize(keywords.size());
  for (std::size_t c = 0; c < keywords.size(); ++c) {
    for (const std::string& surface : keywords[c]) {
      pool.keyword_entries[c].push_back(
          CandidateEntry{surface, tag_word(surface, lexicon), CandidateSource::keyword, c});
    }
    sort_by_surface(pool.keyword_entries[c]);
  }
  return pool;
}

CandidatePool build_pool(const std::filesystem::path& synonym_file,
                         const std::filesystem::path& typo_file, const KeywordsByClass& keywords,
                         const PosLexicon& lexicon) {
  return build_pool(load_word_list(synonym_file), load_word_list(typo_file), keywords, lexicon);
}

std::vector<CandidateEntry> candidates_for(const CandidatePool& pool, const Token& word,
                                           std::optional<std::size_t> target_class) {
  std::vector<CandidateEntry> out;
  if (const auto it = pool.by_word.find(to_lower(word.surface)); it != pool.by_word.end()) {
    for (const CandidateEntry& e : it->second) {
      if (e.pos == word.pos) out.push_back(e);
    }
  }
  if (target_class && *target_class < pool.keyword_entries.size()) {
    const std::size_t own = out.size();
    for (const CandidateEntry& e : pool.keyword_entries[*target_class]) {
      if (e.pos != word.pos || same_word(e.surface, word.surface)) continue;
      const bool duplicate = std::any_of(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(own),
                                         [&](const CandidateEntry& o) { return o.surface == e.surface; });
      if (!duplicate) out.push_back(e);
    }
  }
  return out;
}

}  // namespace advtext
