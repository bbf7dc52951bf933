#include "advtext/text_pipeline.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace advtext {

ParseError::ParseError(std::string path, std::size_t line, const std::string& what)
    : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
      path_(std::move(path)),
      line_(line) {}

namespace {

constexpr std::array<std::pair<PosTag, std::string_view>, 6> kTagNames{{
    {PosTag::noun, "NOUN"},
    {PosTag::plural_noun, "PLURAL_NOUN"},
    {PosTag::verb, "VERB"},
    {PosTag::adjective, "ADJECTIVE"},
    {PosTag::adverb, "ADVERB"},
    {PosTag::other, "OTHER"},
}};

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) parts.push_back(line.substr(start, i - start));
  }
  return parts;
}

// Decodes one UTF-8 code point starting at text[i]; advances i. Invalid
// bytes decode as themselves.
char32_t next_code_point(std::string_view text, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
  const unsigned char lead = byte(i);
  std::size_t length = 1;
  char32_t cp = lead;
  if (lead >= 0xF0 && lead < 0xF8) {
    length = 4;
    cp = lead & 0x07;
  } else if (lead >= 0xE0) {
    length = 3;
    cp = lead & 0x0F;
  } else if (lead >= 0xC0) {
    length = 2;
    cp = lead & 0x1F;
  }
  if (length > 1) {
    if (i + length > text.size()) {
      ++i;
      return lead;
    }
    for (std::size_t k = 1; k < length; ++k) {
      if ((byte(i + k) & 0xC0) != 0x80) {
        ++i;
        return lead;
      }
      cp = (cp << 6) | (byte(i + k) & 0x3F);
    }
  }
  i += length;
  return cp;
}

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == U'’'; }

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  }
  if (cp >= 0x80 && cp <= 0xBF) return false;  // Latin-1 controls, punctuation, symbols
  if (cp == 0xD7 || cp == 0xF7) return false;  // multiplication and division signs
  if (cp >= 0x2000 && cp <= 0x206F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp == 0xFEFF) return false;
  return true;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Suffix rules need at least two characters of stem.
bool has_suffix_rule(std::string_view lower, std::string_view suffix) {
  return lower.size() >= suffix.size() + 2 && ends_with(lower, suffix);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void append_shortest(std::string& out, double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  out.append(buf.data(), ptr);
}

}  // namespace

std::string_view to_string(PosTag tag) {
  for (const auto& [t, name] : kTagNames) {
    if (t == tag) return name;
  }
  return "OTHER";
}

std::optional<PosTag> parse_pos_tag(std::string_view name) {
  for (const auto& [t, n] : kTagNames) {
    if (n == name) return t;
  }
  return std::nullopt;
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tagging

PosLexicon PosLexicon::load(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  PosLexicon lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path.string(), line_no, "expected \"<token>\\t<TAG>\"");
    }
    const std::string_view token = trim(std::string_view(line).substr(0, tab));
    const std::string_view tag_name = trim(std::string_view(line).substr(tab + 1));
    const auto tag = parse_pos_tag(tag_name);
    if (token.empty() || !tag) {
      throw ParseError(path.string(), line_no, "unknown tag or empty token");
    }
    lexicon.add(token, *tag);
  }
  return lexicon;
}

void PosLexicon::add(std::string_view surface, PosTag tag) { tags_[to_lower(surface)] = tag; }

std::optional<PosTag> PosLexicon::lookup(std::string_view surface) const {
  const auto it = tags_.find(to_lower(surface));
  if (it == tags_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  bool has_content = false;
  const auto flush = [&] {
    if (has_content) words.push_back(current);
    current.clear();
    has_content = false;
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = next_code_point(text, i);
    if (is_word_char(cp)) {
      current.append(text.substr(start, i - start));
      has_content = true;
    } else if (is_apostrophe(cp)) {
      current.append(text.substr(start, i - start));
    } else {
      flush();
    }
  }
  flush();
  return words;
}

PosTag tag_word(std::string_view surface, const PosLexicon& lexicon) {
  if (const auto tag = lexicon.lookup(surface)) return *tag;
  const std::string lower = to_lower(surface);
  if (has_suffix_rule(lower, "ly")) return PosTag::adverb;
  if (has_suffix_rule(lower, "ous") || has_suffix_rule(lower, "ful") ||
      has_suffix_rule(lower, "ive")) {
    return PosTag::adjective;
  }
  if (lower.size() >= 2 && lower.back() == 's') {
    const auto stem = lexicon.lookup(std::string_view(lower).substr(0, lower.size() - 1));
    if (stem == PosTag::noun) return PosTag::plural_noun;
  }
  return PosTag::other;
}

std::vector<Token> pos_tag(std::span<const std::string> surfaces, const PosLexicon& lexicon) {
  std::vector<Token> tokens;
  tokens.reserve(surfaces.size());
  for (const std::string& s : surfaces) tokens.push_back(Token{s, tag_word(s, lexicon)});
  return tokens;
}

Document make_document(std::string_view text, std::size_t label, std::string source_id,
                       const PosLexicon& lexicon) {
  const std::vector<std::string> words = tokenize(text);
  return Document{pos_tag(words, lexicon), label, std::move(source_id)};
}

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingTable::EmbeddingTable(std::size_t dim, OovPolicy policy) : dim_(dim), policy_(policy) {
  if (dim == 0) throw std::invalid_argument("embedding dim must be >= 1");
}

bool EmbeddingTable::insert(std::string token, Vector vector) {
  if (vector.size() != dim_) {
    throw std::invalid_argument("embedding for '" + token + "' has length " +
                                std::to_string(vector.size()) + ", expected " +
                                std::to_string(dim_));
  }
  auto [it, inserted] = vectors_.try_emplace(token, std::move(vector));
  if (!inserted) {
    it->second = std::move(vector);
    return false;
  }
  tokens_.push_back(std::move(token));
  return true;
}

const Vector* EmbeddingTable::find(std::string_view surface) const {
  auto it = vectors_.find(std::string(surface));
  if (it == vectors_.end()) it = vectors_.find(to_lower(surface));
  return it == vectors_.end() ? nullptr : &it->second;
}

bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
  return a.dim_ == b.dim_ && a.tokens_ == b.tokens_ && a.vectors_ == b.vectors_;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, OovPolicy policy) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string(), 1, "missing header");
  strip_cr(line);
  const auto header = split_spaces(line);
  std::size_t count = 0;
  std::size_t dim = 0;
  const auto parse_count = [](std::string_view s, std::size_t& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
  };
  if (header.size() != 2 || !parse_count(header[0], count) || !parse_count(header[1], dim) ||
      dim == 0) {
    throw ParseError(path.string(), 1, "header must be \"<count> <dim>\" with dim >= 1");
  }
  EmbeddingTable table(dim, policy);
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (trim(line).empty()) continue;
    const auto parts = split_spaces(line);
    if (parts.size() != dim + 1) {
      throw ParseError(path.string(), line_no,
                       "expected token and " + std::to_string(dim) + " values, found " +
                           std::to_string(parts.size() == 0 ? 0 : parts.size() - 1));
    }
    Vector values(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const auto v = parse_double(parts[k + 1]);
      if (!v) throw ParseError(path.string(), line_no, "bad number '" + std::string(parts[k + 1]) + "'");
      values[k] = *v;
    }
    if (!table.insert(std::string(parts[0]), std::move(values))) ++table.duplicates_;
    ++rows;
  }
  if (rows != count) {
    throw ParseError(path.string(), line_no + 1,
                     "header declares " + std::to_string(count) + " rows, file has " +
                         std::to_string(rows));
  }
  return table;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::string buffer = std::to_string(tokens_.size()) + " " + std::to_string(dim_) + "\n";
  for (const std::string& token : tokens_) {
    buffer += token;
    for (double v : vectors_.at(token)) {
      buffer += ' ';
      append_shortest(buffer, v);
    }
    buffer += '\n';
  }
  out << buffer;
}

Vector hash_vector(std::string_view surface, std::size_t dim) {
  std::uint64_t state = fnv1a64(surface);
  Vector v(dim);
  double norm_sq = 0.0;
  for (double& x : v) {
    x = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    norm_sq += x * x;
  }
  if (norm_sq == 0.0) {
    v[0] = 1.0;
    return v;
  }
  const double norm = std::sqrt(norm_sq);
  for (double& x : v) x /= norm;
  return v;
}

EmbeddedDocument embed(const Document& doc, const EmbeddingTable& table) {
  if (doc.tokens.empty()) throw std::invalid_argument("embed: document has no tokens");
  std::vector<double> values;
  std::vector<std::size_t> index;
  values.reserve(doc.tokens.size() * table.dim());
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    const std::string& surface = doc.tokens[i].surface;
    if (const Vector* v = table.find(surface)) {
      values.insert(values.end(), v->begin(), v->end());
    } else if (table.oov_policy() == OovPolicy::hash) {
      const Vector h = hash_vector(surface, table.dim());
      values.insert(values.end(), h.begin(), h.end());
    } else {
      continue;
    }
    index.push_back(i);
  }
  if (index.empty()) {
    throw std::invalid_argument("embed: every token of '" + doc.source_id +
                                "' is out of vocabulary");
  }
  return EmbeddedDocument{Matrix(index.size(), table.dim(), std::move(values)), std::move(index)};
}

// ---------------------------------------------------------------------------
// Dataset loaders

std::optional<std::vector<std::string>> parse_csv_record(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t i = 0;
  while (true) {
    std::string field;
    if (i < line.size() && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            i += 2;
          } else {
            ++i;
            closed = true;
            break;
          }
        } else {
          field += line[i++];
        }
      }
      if (!closed) return std::nullopt;
      if (i < line.size() && line[i] != ',') return std::nullopt;
    } else {
      while (i < line.size() && line[i] != ',') {
        if (line[i] == '"') return std::nullopt;
        field += line[i++];
      }
    }
    fields.push_back(std::move(field));
    if (i >= line.size()) break;
    ++i;  // comma
  }
  return fields;
}

namespace {

struct ClassQuota {
  std::size_t per_class_train;
  std::size_t per_class_test;
  std::vector<std::size_t> seen;

  bool full(std::size_t label) const { return seen[label] >= per_class_train + per_class_test; }
  bool all_full() const {
    for (std::size_t c = 0; c < seen.size(); ++c) {
      if (!full(c)) return false;
    }
    return true;
  }

  void place(DatasetSplit& split, Document doc) {
    const std::size_t label = doc.label;
    if (full(label)) return;
    if (seen[label] < per_class_train) {
      split.train.push_back(std::move(doc));
    } else {
      split.test.push_back(std::move(doc));
    }
    ++seen[label];
  }

  void require_complete(const DatasetSplit& split, const std::string& path) const {
    std::string shortfall;
    for (std::size_t c = 0; c < seen.size(); ++c) {
      const std::size_t want = per_class_train + per_class_test;
      if (seen[c] < want) {
        if (!shortfall.empty()) shortfall += "; ";
        shortfall += "class " + split.class_names[c] + " needs " + std::to_string(want) + " (" +
                     std::to_string(per_class_train) + " train + " +
                     std::to_string(per_class_test) + " test), found " +
                     std::to_string(seen[c]) + ", short by " + std::to_string(want - seen[c]);
      }
    }
    if (!shortfall.empty()) {
      throw std::runtime_error(path + ": insufficient records: " + shortfall);
    }
  }
};

std::optional<std::size_t> ag_class(std::string_view name) {
  static constexpr std::array<std::string_view, 4> kNames{"World", "Entertainment", "Sports",
                                                          "Business"};
  name = trim(name);
  for (std::size_t c = 0; c < kNames.size(); ++c) {
    if (name == kNames[c]) return c;
  }
  if (name.size() == 1 && name[0] >= '1' && name[0] <= '4') {
    return static_cast<std::size_t>(name[0] - '1');
  }
  return std::nullopt;
}

}  // namespace

DatasetSplit load_ag(const std::filesystem::path& path, const PosLexicon& lexicon,
                     std::size_t per_class_train, std::size_t per_class_test) {
  std::ifstream in = open_input(path);
  DatasetSplit split;
  split.class_names = {"World", "Entertainment", "Sports", "Business"};
  ClassQuota quota{per_class_train, per_class_test, std::vector<std::size_t>(4, 0)};
  std::string line;
  std::size_t line_no = 0;
  while (!quota.all_full() && std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (trim(line).empty()) continue;
    const auto fields = parse_csv_record(line);
    if (!fields) throw ParseError(path.string(), line_no, "malformed CSV quoting");
    if (fields->size() != 3) {
      throw ParseError(path.string(), line_no,
                       "expected 3 fields (class, title, description), found " +
                           std::to_string(fields->size()));
    }
    const auto label = ag_class((*fields)[0]);
    if (!label || quota.full(*label)) continue;
    Document doc = make_document((*fields)[2], *label, "ag:" + std::to_string(line_no), lexicon);
    if (doc.tokens.empty()) continue;
    quota.place(split, std::move(doc));
  }
  quota.require_complete(split, path.string());
  return split;
}

DatasetSplit load_amazon(const std::filesystem::path& path, const PosLexicon& lexicon,
                         std::size_t per_class_train, std::size_t per_class_test) {
  std::ifstream in = open_input(path);
  DatasetSplit split;
  split.class_names = {"good", "bad"};
  ClassQuota quota{per_class_train, per_class_test, std::vector<std::size_t>(2, 0)};

  std::size_t block_index = 0;
  std::optional<std::string> score_field;
  std::optional<std::string> text_field;
  bool in_block = false;

  const auto finish_block = [&] {
    if (!in_block) return;
    in_block = false;
    if (!score_field) throw ParseError(path.string(), block_index, "block missing review/score");
    if (!text_field) throw ParseError(path.string(), block_index, "block missing review/text");
    const auto score = parse_double(*score_field);
    if (!score) {
      throw ParseError(path.string(), block_index, "unparseable review/score '" + *score_field + "'");
    }
    std::optional<std::size_t> label;
    if (*score >= 4.0) label = 0;
    if (*score <= 2.0) label = 1;
    score_field.reset();
    std::string text = std::move(*text_field);
    text_field.reset();
    if (!label || quota.full(*label)) return;
    Document doc =
        make_document(text, *label, "amazon:" + std::to_string(block_index), lexicon);
    if (doc.tokens.empty()) return;
    quota.place(split, std::move(doc));
  };

  std::string line;
  while (!quota.all_full() && std::getline(in, line)) {
    strip_cr(line);
    if (trim(line).empty()) {
      finish_block();
      continue;
    }
    if (!in_block) {
      in_block = true;
      ++block_index;
    }
    constexpr std::string_view kScore = "review/score:";
    constexpr std::string_view kText = "review/text:";
    const std::string_view view(line);
    if (view.starts_with(kScore)) {
      score_field = std::string(trim(view.substr(kScore.size())));
    } else if (view.starts_with(kText)) {
      text_field = std::string(trim(view.substr(kText.size())));
    }
  }
  if (!quota.all_full()) finish_block();
  quota.require_complete(split, path.string());
  return split;
}

}  // namespace advtext
