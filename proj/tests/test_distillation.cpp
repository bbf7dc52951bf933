#include <cmath>
#include <filesystem>

#include "advtext/distillation.hpp"
#include "advtext/text_pipeline.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace advtext;
using namespace advtext::testing;

namespace {

ModelConfig small_arch() {
  ModelConfig c;
  c.embedding_dim = 4;
  c.num_classes = 2;
  c.filters_per_width = 8;
  return c;
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse_model(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_SUITE("distillation") {
  TEST_CASE("soft labels") {
    const auto train = planted_keyword_examples(5, 2);
    ModelConfig c = small_arch();
    c.num_classes = 4;
    const SoftLabelSet uniform = compute_soft_labels(ClassifierModel::zeros(c), train, 20.0);
    CHECK(uniform.temperature == 20.0);
    REQUIRE(uniform.soft.size() == train.size());
    for (const Vector& s : uniform.soft) CHECK(s == Vector{0.25, 0.25, 0.25, 0.25});

    ClassifierModel fixed = ClassifierModel::zeros(small_arch());
    fixed.dense_bias = {2.0, 0.0};
    const SoftLabelSet soft = compute_soft_labels(fixed, train, 20.0);
    const double e = std::exp(0.1);
    CHECK(soft.soft[0][0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
    CHECK(soft.soft[0][1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
    CHECK(soft.soft[0][0] == doctest::Approx(0.525).epsilon(1e-3));

    const ClassifierModel teacher = random_model(small_arch(), 4);
    const SoftLabelSet a = compute_soft_labels(teacher, train, 30.0);
    const SoftLabelSet b = compute_soft_labels(teacher, train, 30.0);
    CHECK(a.soft == b.soft);
    CHECK(a.hard == b.hard);
    for (std::size_t i = 0; i < train.size(); ++i) {
      double total = 0.0;
      for (double v : a.soft[i]) total += v;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(argmax(a.soft[i]) == predict(teacher, train[i].embedded));
    }
  }

  TEST_CASE("mixed target") {
    const Vector t = mixed_target(1, Vector{0.6, 0.4}, 0.1, 0.9, 2);
    CHECK(t[0] == doctest::Approx(0.54));
    CHECK(t[1] == doctest::Approx(0.46));
    CHECK_THROWS_AS(mixed_target(0, Vector{1.0}, 0.1, 0.9, 2), std::invalid_argument);
  }

  TEST_CASE("mixed-loss gradient is the weighted sum of the two gradients") {
    Rng rng(8);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ClassifierModel m = random_model(tiny_config(), 40 + seed);
      m.temperature = 20.0;
      const Matrix x = random_input(3 + rng.below(5), 8, rng);
      const Vector soft = random_distribution(3, rng);
      const std::size_t hard = rng.below(3);
      const Vector mixed = mixed_target(hard, soft, 0.1, 0.9, 3);

      const ForwardTrace t = forward(m, x);
      const GradientSet gh = backward(m, x, t, one_hot(hard, 3));
      const GradientSet gs = backward(m, x, t, soft);
      const GradientSet gm = backward(m, x, t, mixed);
      for (std::size_t i = 0; i < gm.dense_weights.size(); ++i) {
        CHECK(gm.dense_weights.values()[i] ==
              doctest::Approx(0.1 * gh.dense_weights.values()[i] + 0.9 * gs.dense_weights.values()[i]));
      }
      for (std::size_t i = 0; i < gm.input_gradient.size(); ++i) {
        CHECK(gm.input_gradient.values()[i] ==
              doctest::Approx(0.1 * gh.input_gradient.values()[i] + 0.9 * gs.input_gradient.values()[i]));
      }

      // Finite differences on the loss written as 0.1 CE_hard + 0.9 CE_soft.
      const auto mixed_loss = [&](const ClassifierModel& mm, const Matrix& xx) {
        const Vector p = forward(mm, xx).probabilities;
        return 0.1 * cross_entropy(p, one_hot(hard, 3)) + 0.9 * cross_entropy(p, soft);
      };
      const double h = 1e-4;
      for (std::size_t i = 0; i < x.size(); ++i) {
        Matrix plus = x, minus = x;
        plus.values()[i] += h;
        minus.values()[i] -= h;
        if (!(forward(m, plus).argmax == t.argmax) || !(forward(m, minus).argmax == t.argmax)) continue;
        const double numeric = (mixed_loss(m, plus) - mixed_loss(m, minus)) / (2 * h);
        CHECK(gradient_error(gm.input_gradient.values()[i], numeric) < 1e-3);
      }
      for (std::size_t i = 0; i < m.dense_weights.size(); ++i) {
        ClassifierModel plus = m, minus = m;
        plus.dense_weights.values()[i] += h;
        minus.dense_weights.values()[i] -= h;
        const double numeric = (mixed_loss(plus, x) - mixed_loss(minus, x)) / (2 * h);
        CHECK(gradient_error(gm.dense_weights.values()[i], numeric) < 1e-3);
      }
    }
  }

  TEST_CASE("degenerate mixes reduce to ordinary training") {
    const auto train = planted_keyword_examples(20, 5);
    const ModelConfig arch = small_arch();
    const ClassifierModel teacher = random_model(arch, 1);

    SUBCASE("soft weight 0 at T = 1 is bit-identical to plain training") {
      DistillationConfig dc;
      dc.temperature = 1.0;
      dc.hard_weight = 1.0;
      dc.soft_weight = 0.0;
      dc.epochs = 2;
      const SoftLabelSet soft = compute_soft_labels(teacher, train, 1.0);
      const ClassifierModel student = train_distilled(train, soft, dc, arch, 9);
      const TrainResult plain = train_from_scratch(arch, train, TrainConfig{2, {}, 9});
      CHECK(student == plain.model);
    }
    SUBCASE("hard weight 1 at T = 20 equals ordinary training at T = 20") {
      DistillationConfig dc;
      dc.temperature = 20.0;
      dc.hard_weight = 1.0;
      dc.soft_weight = 0.0;
      dc.epochs = 2;
      const SoftLabelSet soft = compute_soft_labels(teacher, train, 20.0);
      std::vector<EpochLog> log;
      const ClassifierModel student = train_distilled(train, soft, dc, arch, 9, &log);
      ModelConfig hot = arch;
      hot.temperature = 20.0;
      TrainResult plain = train_from_scratch(hot, train, TrainConfig{2, {}, 9});
      CHECK(log.front().mean_loss == plain.log.front().mean_loss);
      plain.model.temperature = 1.0;
      CHECK(student == plain.model);
    }
  }

  TEST_CASE("student is deployed at T = 1") {
    const auto train = planted_keyword_examples(10, 6);
    const ClassifierModel teacher = random_model(small_arch(), 2);
    for (double t : {10.0, 20.0, 40.0}) {
      DistillationConfig dc;
      dc.temperature = t;
      dc.epochs = 1;
      const ClassifierModel s =
          train_distilled(train, compute_soft_labels(teacher, train, t), dc, small_arch(), 3);
      CHECK(s.temperature == 1.0);
    }
  }

  TEST_CASE("configuration errors") {
    const auto train = planted_keyword_examples(4, 6);
    const ClassifierModel teacher = random_model(small_arch(), 2);
    DistillationConfig dc;
    const SoftLabelSet at10 = compute_soft_labels(teacher, train, 10.0);
    CHECK_THROWS_AS(train_distilled(train, at10, dc, small_arch(), 1), std::invalid_argument);
    SoftLabelSet partial = compute_soft_labels(teacher, train, 20.0);
    partial.soft.pop_back();
    partial.hard.pop_back();
    CHECK_THROWS_AS(train_distilled(train, partial, dc, small_arch(), 1), std::invalid_argument);

    DistillationConfig bad;
    bad.hard_weight = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = DistillationConfig{};
    bad.temperature = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_NOTHROW(DistillationConfig{}.validate());
  }

  TEST_CASE("pipeline on a separable set") {
    const auto train = planted_keyword_examples(100, 12);
    const auto test = planted_keyword_examples(50, 13);
    ModelConfig arch = small_arch();
    arch.filters_per_width = 20;
    const DistillationOutcome out = distillation_pipeline(train, test, arch, DistillationConfig{}, 1, 2);
    CHECK(out.report.temperature == 20.0);
    CHECK(out.report.teacher_accuracy >= 0.95);
    CHECK(out.report.student_accuracy >= 0.95);
    CHECK(out.teacher.temperature == 1.0);
    CHECK(out.student.temperature == 1.0);
    CHECK(out.student.config().kernel_widths == out.teacher.config().kernel_widths);
  }

  TEST_CASE("model files round-trip exactly") {
    ModelConfig c = tiny_config();
    c.temperature = 2.5;
    c.dropout_rate = 0.25;
    ClassifierModel m = random_model(c, 77);
    m.dense_weights(0, 0) = 1.0 / 3.0;
    m.dense_weights(1, 1) = -1e-300;
    m.conv[0].weights(0, 0) = 123456789.125;
    const std::string text = serialize_model(m);
    CHECK(parse_model(text) == m);
    CHECK(serialize_model(parse_model(text)) == text);
    CHECK(text.rfind("advtext-model\nformat_version 1\n", 0) == 0);

    const auto path = std::filesystem::temp_directory_path() / "advtext_model_roundtrip.model";
    save_model(m, path);
    CHECK(load_model(path) == m);
    std::filesystem::remove(path);
  }

  TEST_CASE("malformed model files report the line") {
    const std::string good = serialize_model(random_model(tiny_config(), 1));
    CHECK(parse_error_line("not-a-model\n") == 1);
    std::string v2 = good;
    v2.replace(v2.find("format_version 1"), 16, "format_version 2");
    CHECK(parse_error_line(v2) == 2);
    std::string bad_number = good;
    const std::size_t conv_line = bad_number.find("conv 2\n");
    const std::size_t row = conv_line + 7;
    bad_number.replace(row, bad_number.find(' ', row) - row, "1.2.3");
    CHECK(parse_error_line(bad_number) == 10);
    CHECK(parse_error_line(good.substr(0, good.size() - 4)) > 0);
  }
}
