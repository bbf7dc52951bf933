#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "advtext/matrix.hpp"

namespace advtext {

// Error raised while reading an input file; carries the file and the
// 1-based line (or record) number that failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string path, std::size_t line, const std::string& what);

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

enum class PosTag { noun, plural_noun, verb, adjective, adverb, other };

std::string_view to_string(PosTag tag);
std::optional<PosTag> parse_pos_tag(std::string_view name);

struct Token {
  std::string surface;
  PosTag pos = PosTag::other;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Document {
  std::vector<Token> tokens;
  std::size_t label = 0;
  std::string source_id;

  friend bool operator==(const Document&, const Document&) = default;
};

std::string to_lower(std::string_view text);

// Word lexicon used by the tagger: lowercased surface -> tag.
class PosLexicon {
 public:
  PosLexicon() = default;

  // "<token>\t<TAG>" per line; blank lines and lines starting with '#' skipped.
  static PosLexicon load(const std::filesystem::path& path);

  void add(std::string_view surface, PosTag tag);
  std::optional<PosTag> lookup(std::string_view surface) const;
  std::size_t size() const { return tags_.size(); }

 private:
  std::unordered_map<std::string, PosTag> tags_;
};

// Letters, digits and apostrophes form words; everything else separates.
std::vector<std::string> tokenize(std::string_view text);

// Lexicon lookup first, then suffix rules: "-ly" -> adverb;
// "-ous" / "-ful" / "-ive" -> adjective; a trailing "s" on a lexicon noun ->
// plural noun; anything else -> other.
PosTag tag_word(std::string_view surface, const PosLexicon& lexicon);
std::vector<Token> pos_tag(std::span<const std::string> surfaces, const PosLexicon& lexicon);

Document make_document(std::string_view text, std::size_t label, std::string source_id,
                       const PosLexicon& lexicon);

enum class OovPolicy { skip, hash };

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 1, OovPolicy policy = OovPolicy::skip);

  // "<count> <dim>" header, then "<token> <f1> ... <f_dim>" lines.
  static EmbeddingTable load(const std::filesystem::path& path,
                             OovPolicy policy = OovPolicy::skip);
  void save(const std::filesystem::path& path) const;

  // Inserts or overwrites; returns false if the token was already present.
  bool insert(std::string token, Vector vector);

  // Exact surface first, then its lowercase form.
  const Vector* find(std::string_view surface) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  OovPolicy oov_policy() const { return policy_; }
  void set_oov_policy(OovPolicy policy) { policy_ = policy; }
  // Tokens repeated in the loaded file (last occurrence kept).
  std::size_t duplicate_count() const { return duplicates_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b);

 private:
  std::size_t dim_;
  OovPolicy policy_;
  std::vector<std::string> tokens_;  // first-insertion order
  std::unordered_map<std::string, Vector> vectors_;
  std::size_t duplicates_ = 0;
};

// Deterministic unit-norm pseudo-vector for an out-of-vocabulary surface:
// FNV-1a 64 of the bytes seeds a splitmix64 stream; coordinates are uniform
// in [-1, 1) before normalisation.
Vector hash_vector(std::string_view surface, std::size_t dim);

struct EmbeddedDocument {
  Matrix matrix;
  std::vector<std::size_t> token_index;  // row -> position in the document
};

// Rows follow token order. Under the skip policy OOV tokens are dropped;
// throws std::invalid_argument if no row remains.
EmbeddedDocument embed(const Document& doc, const EmbeddingTable& table);

struct DatasetSplit {
  std::vector<Document> train;
  std::vector<Document> test;
  std::vector<std::string> class_names;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

// AG news CSV: "<class>","<title>","<description>". Classes World,
// Entertainment, Sports, Business (or 1-4 in that order); the description
// is the classified text. Other classes are skipped.
DatasetSplit load_ag(const std::filesystem::path& path, const PosLexicon& lexicon,
                     std::size_t per_class_train = 4000, std::size_t per_class_test = 400);

// SNAP review blocks separated by blank lines with "review/score:" and
// "review/text:" fields. Score >= 4.0 -> good (0), <= 2.0 -> bad (1),
// anything in between is dropped.
DatasetSplit load_amazon(const std::filesystem::path& path, const PosLexicon& lexicon,
                         std::size_t per_class_train = 2000, std::size_t per_class_test = 200);

// Split one CSV record with doubled-quote escaping. Returns nullopt when the
// quoting is malformed.
std::optional<std::vector<std::string>> parse_csv_record(std::string_view line);

}  // namespace advtext
