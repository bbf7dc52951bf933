#include "advtext/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace advtext {

std::string_view to_string(EditKind kind) {
  switch (kind) {
    case EditKind::remove: return "delete";
    case EditKind::insert_before: return "insert_before";
    case EditKind::replace: return "replace";
  }
  return "delete";
}

std::optional<EditKind> parse_edit_kind(std::string_view name) {
  if (name == "delete") return EditKind::remove;
  if (name == "insert_before") return EditKind::insert_before;
  if (name == "replace") return EditKind::replace;
  return std::nullopt;
}

std::vector<std::size_t> order_by_saliency(std::span<const double> saliency) {
  std::vector<std::size_t> order(saliency.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return saliency[a] > saliency[b]; });
  return order;
}

std::vector<double> word_saliency(const ClassifierModel& model, const Document& doc,
                                  const EmbeddingTable& table) {
  const EmbeddedDocument embedded = embed(doc, table);
  const ForwardTrace trace = forward(model, embedded.matrix, Mode::eval);
  const GradientSet grad =
      backward(model, embedded.matrix, trace, one_hot(doc.label, model.num_classes));
  std::vector<double> saliency(doc.tokens.size(), 0.0);
  for (std::size_t r = 0; r < embedded.token_index.size(); ++r) {
    double sq = 0.0;
    for (double g : grad.input_gradient.row(r)) sq += g * g;
    saliency[embedded.token_index[r]] = std::sqrt(sq);
  }
  return saliency;
}

std::vector<std::size_t> rank_words_by_saliency(const ClassifierModel& model,
                                                const Document& doc,
                                                const EmbeddingTable& table) {
  return order_by_saliency(word_saliency(model, doc, table));
}

Document apply_edit(const Document& doc, const EditOp& edit) {
  const std::size_t n = doc.tokens.size();
  const bool inserting = edit.kind == EditKind::insert_before;
  if (inserting ? edit.position > n : edit.position >= n) {
    throw std::out_of_range("apply_edit: position " + std::to_string(edit.position) +
                            " out of range for " + std::string(to_string(edit.kind)) +
                            " on a document of " + std::to_string(n) + " tokens");
  }
  if (edit.kind != EditKind::remove && !edit.new_word) {
    throw std::invalid_argument("apply_edit: insert/replace needs a new word");
  }
  Document out = doc;
  const auto at = out.tokens.begin() + static_cast<std::ptrdiff_t>(edit.position);
  switch (edit.kind) {
    case EditKind::remove: out.tokens.erase(at); break;
    case EditKind::insert_before: out.tokens.insert(at, *edit.new_word); break;
    case EditKind::replace: *at = *edit.new_word; break;
  }
  return out;
}

std::optional<double> log_probability_of(const ClassifierModel& model, const Document& doc,
                                         const EmbeddingTable& table, std::size_t label) {
  if (doc.tokens.empty()) return std::nullopt;
  std::optional<EmbeddedDocument> embedded;
  try {
    embedded = embed(doc, table);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
  const ForwardTrace trace = forward(model, embedded->matrix, Mode::eval);
  return log_softmax_with_temperature(trace.logits, model.temperature)[label];
}

namespace {

// Highest-probability class other than `label`.
std::size_t runner_up(std::span<const double> probabilities, std::size_t label) {
  std::size_t best = label == 0 ? 1 : 0;
  for (std::size_t c = 0; c < probabilities.size(); ++c) {
    if (c != label && probabilities[c] > probabilities[best]) best = c;
  }
  return best;
}

// Edits allowed on the word at `index` under the deletion / insertion /
// replacement rules, in candidate order.
std::vector<EditOp> admissible_edits(const Document& doc, std::size_t index,
                                     const CandidatePool& pool, std::size_t target_class) {
  std::vector<EditOp> edits;
  const Token& word = doc.tokens[index];
  if (word.pos == PosTag::adverb) {
    if (doc.tokens.size() > 1) edits.push_back(EditOp{EditKind::remove, index, {}, {}});
    return edits;
  }
  for (const CandidateEntry& c : candidates_for(pool, word, target_class)) {
    edits.push_back(EditOp{EditKind::replace, index, Token{c.surface, c.pos}, c.source});
  }
  if (word.pos == PosTag::adjective) {
    const Token as_adverb{word.surface, PosTag::adverb};
    for (const CandidateEntry& c : candidates_for(pool, as_adverb, target_class)) {
      edits.push_back(EditOp{EditKind::insert_before, index, Token{c.surface, c.pos}, c.source});
    }
  }
  return edits;
}

}  // namespace

AttackResult attack(const ClassifierModel& model, const Document& doc, const CandidatePool& pool,
                    const EmbeddingTable& table, std::size_t max_rounds) {
  if (max_rounds == 0) throw std::invalid_argument("attack: max_rounds must be >= 1");
  const EmbeddedDocument embedded = embed(doc, table);
  const ForwardTrace initial = forward(model, embedded.matrix, Mode::eval);
  const std::size_t label = doc.label;
  if (argmax(initial.probabilities) != label) {
    throw AttackPreconditionError("attack: document '" + doc.source_id +
                                  "' is not classified correctly before the attack");
  }

  AttackResult result;
  result.original_class = label;
  result.original_document = doc;
  Document current = doc;
  Vector probabilities = initial.probabilities;
  double current_log = log_softmax_with_temperature(initial.logits, model.temperature)[label];
  result.true_class_probability.push_back(probabilities[label]);
  result.true_class_log_probability.push_back(current_log);

  while (result.edits.size() < max_rounds) {
    const std::size_t target_class = runner_up(probabilities, label);
    const std::vector<std::size_t> ranking = rank_words_by_saliency(model, current, table);

    std::optional<EditOp> chosen;
    double chosen_log = current_log;
    for (std::size_t index : ranking) {
      for (const EditOp& edit : admissible_edits(current, index, pool, target_class)) {
        const auto trial_log = log_probability_of(model, apply_edit(current, edit), table, label);
        if (trial_log && *trial_log < chosen_log) {
          chosen = edit;
          chosen_log = *trial_log;
        }
      }
      if (chosen) break;
    }
    if (!chosen) break;

    current = apply_edit(current, *chosen);
    result.edits.push_back(*chosen);
    const ForwardTrace trace = forward(model, embed(current, table).matrix, Mode::eval);
    probabilities = trace.probabilities;
    current_log = log_softmax_with_temperature(trace.logits, model.temperature)[label];
    result.true_class_probability.push_back(probabilities[label]);
    result.true_class_log_probability.push_back(current_log);
    if (argmax(probabilities) != label) break;
  }

  result.final_class = argmax(probabilities);
  result.success = result.final_class != label;
  result.num_changes = result.edits.size();
  result.final_document = std::move(current);
  return result;
}

}  // namespace advtext
