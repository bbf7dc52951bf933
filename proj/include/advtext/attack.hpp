#pragma once

// Word-level adversarial search over a trained classifier. Words are visited
// in order of the loss-gradient norm of their embedding; adverbs are deleted,
// other words are replaced by a pool candidate, and an adverb candidate for
// an adjective is inserted in front of it instead.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "advtext/candidate_pool.hpp"
#include "advtext/classifier.hpp"
#include "advtext/text_pipeline.hpp"

namespace advtext {

enum class EditKind { remove, insert_before, replace };

std::string_view to_string(EditKind kind);
std::optional<EditKind> parse_edit_kind(std::string_view name);

struct EditOp {
  EditKind kind = EditKind::remove;
  std::size_t position = 0;  // index in the document the edit is applied to
  std::optional<Token> new_word;
  std::optional<CandidateSource> source;

  friend bool operator==(const EditOp&, const EditOp&) = default;
};

struct AttackResult {
  bool success = false;
  std::vector<EditOp> edits;
  std::size_t original_class = 0;
  std::size_t final_class = 0;
  std::size_t num_changes = 0;
  Document original_document;
  Document final_document;
  // Probability of the original class before the first edit and after each
  // applied edit (size = num_changes + 1), with the matching log values.
  std::vector<double> true_class_probability;
  std::vector<double> true_class_log_probability;
};

// The document to attack is not classified correctly to begin with.
class AttackPreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultMaxRounds = 50;

// Descending order of saliency; equal values keep the lower index first.
std::vector<std::size_t> order_by_saliency(std::span<const double> saliency);

// Euclidean norm of d loss / d embedding for every token at the document's
// label. Tokens without an embedding row get 0.
std::vector<double> word_saliency(const ClassifierModel& model, const Document& doc,
                                  const EmbeddingTable& table);

std::vector<std::size_t> rank_words_by_saliency(const ClassifierModel& model,
                                                const Document& doc,
                                                const EmbeddingTable& table);

// Returns a new document; throws std::out_of_range for an invalid position.
Document apply_edit(const Document& doc, const EditOp& edit);

AttackResult attack(const ClassifierModel& model, const Document& doc, const CandidatePool& pool,
                    const EmbeddingTable& table, std::size_t max_rounds = kDefaultMaxRounds);

// Eval-mode log-probability of `label` for a document, or nullopt if the
// document has no embeddable token.
std::optional<double> log_probability_of(const ClassifierModel& model, const Document& doc,
                                         const EmbeddingTable& table, std::size_t label);

}  // namespace advtext
