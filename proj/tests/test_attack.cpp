#include <cmath>

#include "advtext/attack.hpp"
#include "advtext/candidate_pool.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace advtext;
using namespace advtext::testing;

namespace {

Document doc_of(std::initializer_list<std::pair<const char*, PosTag>> tokens, std::size_t label) {
  Document d;
  for (const auto& [s, pos] : tokens) d.tokens.push_back(Token{s, pos});
  d.label = label;
  d.source_id = "t";
  return d;
}

std::vector<std::string> surfaces(const Document& d) {
  std::vector<std::string> out;
  for (const Token& t : d.tokens) out.push_back(t.surface);
  return out;
}

// Width-1 filters, d = 4. Filter f fires on coordinate f; dense weights
// route filter 0 to Sports and filter 1 to World.
struct NewsFixture {
  ClassifierModel model;
  EmbeddingTable table{4};
  CandidatePool pool;
  PosLexicon lexicon;

  NewsFixture() {
    ModelConfig c;
    c.embedding_dim = 4;
    c.num_classes = 4;  // World, Entertainment, Sports, Business
    c.kernel_widths = {1};
    c.filters_per_width = 2;
    model = ClassifierModel::zeros(c);
    model.conv[0].weights(0, 0) = 1.0;
    model.conv[0].weights(1, 1) = 1.0;
    model.dense_weights(0, 2) = 1.0;
    model.dense_weights(1, 0) = 2.0;

    table.insert("team", Vector{1, 0, 0, 0});
    table.insert("big", Vector{0, 0, 1, 0});
    table.insert("globally", Vector{0, 1, 0, 0});
    table.insert("Yukos", Vector{0, 1, 0, 0});
    lexicon.add("team", PosTag::noun);
    lexicon.add("big", PosTag::adjective);

    KeywordsByClass keywords(4);
    keywords[0] = {"Yukos", "globally"};
    pool = build_pool(WordListFile{}, WordListFile{}, keywords, lexicon);
  }
};

}  // namespace

TEST_SUITE("attack_engine") {
  TEST_CASE("saliency order") {
    CHECK(order_by_saliency(std::vector<double>{0.1, 0.9, 0.5}) == std::vector<std::size_t>{1, 2, 0});
    CHECK(order_by_saliency(std::vector<double>{0.3, 0.3}) == std::vector<std::size_t>{0, 1});
    CHECK(order_by_saliency(std::vector<double>{}).empty());
  }

  TEST_CASE("planted keyword is ranked first") {
    ModelConfig c;
    c.embedding_dim = 3;
    c.num_classes = 2;
    c.kernel_widths = {1};
    c.filters_per_width = 2;
    ClassifierModel m = ClassifierModel::zeros(c);
    m.conv[0].weights(0, 0) = 1.0;       // filter 0 matches the keyword
    m.conv[0].weights(1, 1) = 1.0;       // filter 1 is never read
    m.dense_weights(0, 0) = 1.5;
    EmbeddingTable t(3);
    t.insert("kw", Vector{1.0, 0.0, 0.2});
    t.insert("aa", Vector{0.1, 0.9, 0.3});
    t.insert("bb", Vector{-0.2, 0.5, 0.9});
    const Document d = doc_of({{"aa", PosTag::noun}, {"bb", PosTag::noun}, {"kw", PosTag::noun},
                               {"aa", PosTag::noun}},
                              0);
    const auto order = rank_words_by_saliency(m, d, t);
    CHECK(order.front() == 2);

    // Exhaustive check against the input gradient.
    const EmbeddedDocument e = embed(d, t);
    const GradientSet g = backward(m, e.matrix, forward(m, e.matrix), one_hot(0, 2));
    std::vector<double> norms;
    for (std::size_t r = 0; r < e.matrix.rows(); ++r) {
      double s = 0.0;
      for (double v : g.input_gradient.row(r)) s += v * v;
      norms.push_back(std::sqrt(s));
    }
    const auto saliency = word_saliency(m, d, t);
    for (std::size_t i = 0; i < norms.size(); ++i) CHECK(saliency[i] == doctest::Approx(norms[i]));
    CHECK(order == order_by_saliency(norms));
  }

  TEST_CASE("OOV tokens get zero saliency") {
    const ClassifierModel m = random_model(tiny_config(4, 2), 3);
    EmbeddingTable t(4);
    t.insert("a", Vector{0.5, 0.1, -0.3, 0.2});
    const Document d = doc_of({{"zz", PosTag::other}, {"a", PosTag::other}}, 0);
    const auto s = word_saliency(m, d, t);
    CHECK(s[0] == 0.0);
    CHECK(rank_words_by_saliency(m, d, t).back() == 0);
    CHECK_THROWS(word_saliency(m, doc_of({{"zz", PosTag::other}}, 0), t));
  }

  TEST_CASE("apply_edit") {
    const Document abc = doc_of({{"a", PosTag::other}, {"b", PosTag::other}, {"c", PosTag::other}}, 0);
    CHECK(surfaces(apply_edit(abc, EditOp{EditKind::remove, 1, {}, {}})) ==
          std::vector<std::string>{"a", "c"});
    const Document a = doc_of({{"a", PosTag::other}}, 0);
    CHECK(surfaces(apply_edit(a, EditOp{EditKind::insert_before, 0, Token{"x", PosTag::adverb},
                                        CandidateSource::synonym})) ==
          std::vector<std::string>{"x", "a"});
    CHECK(surfaces(apply_edit(a, EditOp{EditKind::insert_before, 1, Token{"x", PosTag::adverb},
                                        CandidateSource::synonym})) ==
          std::vector<std::string>{"a", "x"});
    CHECK(surfaces(apply_edit(abc, EditOp{EditKind::replace, 2, Token{"z", PosTag::other},
                                          CandidateSource::typo})) ==
          std::vector<std::string>{"a", "b", "z"});
    CHECK(surfaces(abc) == std::vector<std::string>{"a", "b", "c"});

    CHECK_THROWS_AS(apply_edit(abc, EditOp{EditKind::remove, 3, {}, {}}), std::out_of_range);
    CHECK_THROWS_AS(apply_edit(abc, EditOp{EditKind::replace, 3, Token{"z", PosTag::other},
                                           CandidateSource::typo}),
                    std::out_of_range);
    CHECK_THROWS_AS(apply_edit(abc, EditOp{EditKind::insert_before, 4, Token{"z", PosTag::other},
                                           CandidateSource::typo}),
                    std::out_of_range);
    CHECK_THROWS(apply_edit(abc, EditOp{EditKind::replace, 0, {}, {}}));
  }

  TEST_CASE("adverb keyword insertion flips Sports to World") {
    const NewsFixture f;
    CHECK(f.pool.keywords_by_class[0].count("Yukos") == 1);
    const Document d = make_document("big team", 2, "ag:1", f.lexicon);
    REQUIRE(predict(f.model, embed(d, f.table).matrix) == 2);
    const AttackResult r = attack(f.model, d, f.pool, f.table);
    CHECK(r.success);
    CHECK(r.num_changes == 1);
    CHECK(r.original_class == 2);
    CHECK(r.final_class == 0);
    REQUIRE(r.edits.size() == 1);
    CHECK(r.edits[0].kind == EditKind::insert_before);
    CHECK(r.edits[0].position == 0);
    CHECK(r.edits[0].new_word->surface == "globally");
    CHECK(r.edits[0].source == CandidateSource::keyword);
    CHECK(surfaces(r.final_document) == std::vector<std::string>{"globally", "big", "team"});
    CHECK_FALSE(replay_violation(f.model, r, f.table));
  }

  TEST_CASE("noun keyword replacement") {
    NewsFixture f;
    f.lexicon.add("Yukos", PosTag::noun);
    KeywordsByClass keywords(4);
    keywords[0] = {"Yukos"};
    f.pool = build_pool(WordListFile{}, WordListFile{}, keywords, f.lexicon);
    const Document d = make_document("team", 2, "ag:2", f.lexicon);
    const AttackResult r = attack(f.model, d, f.pool, f.table);
    CHECK(r.success);
    REQUIRE(r.edits.size() == 1);
    CHECK(r.edits[0].kind == EditKind::replace);
    CHECK(surfaces(r.final_document) == std::vector<std::string>{"Yukos"});
  }

  TEST_CASE("adverbs are deleted") {
    NewsFixture f;
    f.table.insert("heavily", Vector{1.5, 0, 0, 0});
    const Document d = make_document("heavily big team", 2, "x", f.lexicon);
    // The strongest Sports signal lives in the adverb; deleting it helps.
    const AttackResult r = attack(f.model, d, f.pool, f.table);
    CHECK(r.success);
    REQUIRE(r.edits.size() == 2);
    CHECK(r.edits[1].kind == EditKind::insert_before);
    CHECK(r.edits[0].kind == EditKind::remove);
    CHECK(r.original_document.tokens[r.edits[0].position].surface == "heavily");
    CHECK_FALSE(replay_violation(f.model, r, f.table));
  }

  TEST_CASE("input-invariant model fails with no edits") {
    NewsFixture f;
    for (double& v : f.model.dense_weights.values()) v = 0.0;
    const Document d = make_document("big team", 0, "x", f.lexicon);
    const AttackResult r = attack(f.model, d, f.pool, f.table);
    CHECK_FALSE(r.success);
    CHECK(r.num_changes == 0);
    CHECK(r.final_class == 0);
    CHECK(r.final_document == d);
    CHECK(r.true_class_probability.size() == 1);
  }

  TEST_CASE("attack errors") {
    const NewsFixture f;
    const Document d = make_document("big team", 2, "x", f.lexicon);
    CHECK_THROWS_AS(attack(f.model, d, f.pool, f.table, 0), std::invalid_argument);
    Document wrong = d;
    wrong.label = 1;
    CHECK_THROWS_AS(attack(f.model, wrong, f.pool, f.table), AttackPreconditionError);
  }

  TEST_CASE("max_rounds bounds the number of edits") {
    NewsFixture f;
    // Many sports words, each replaceable by a weaker typo.
    std::string text;
    for (int i = 0; i < 6; ++i) {
      const std::string w = "team" + std::to_string(i);
      f.table.insert(w, Vector{1.0 + 0.1 * i, 0, 0, 0});
      f.table.insert(w + "x", Vector{0, 0, 0, 1});
      f.lexicon.add(w, PosTag::noun);
      text += w + " ";
    }
    WordListFile typos;
    for (int i = 0; i < 6; ++i) typos["team" + std::to_string(i)] = {"team" + std::to_string(i) + "x"};
    f.pool = build_pool(WordListFile{}, typos, KeywordsByClass(4), f.lexicon);
    const Document d = make_document(text, 2, "x", f.lexicon);
    const AttackResult r = attack(f.model, d, f.pool, f.table, 2);
    CHECK_FALSE(r.success);
    CHECK(r.num_changes == 2);
    CHECK_FALSE(replay_violation(f.model, r, f.table));
    // Highest-saliency word goes first; all have the same gradient norm except
    // the argmax position, which gets the whole gradient.
    CHECK(r.edits[0].position == 5);
    const AttackResult again = attack(f.model, d, f.pool, f.table, 2);
    CHECK(again.edits == r.edits);
  }

  TEST_CASE("edit kind names") {
    CHECK(to_string(EditKind::remove) == "delete");
    CHECK(parse_edit_kind("insert_before") == EditKind::insert_before);
    CHECK(parse_edit_kind("replace") == EditKind::replace);
    CHECK_FALSE(parse_edit_kind("swap"));
  }
}
