#pragma once

// Helpers shared by the unit tests and the acceptance runner: random tiny
// models, an independent forward pass, and a finite-difference checker.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "advtext/attack.hpp"
#include "advtext/classifier.hpp"
#include "advtext/experiments.hpp"
#include "advtext/rng.hpp"

namespace advtext::testing {

inline ModelConfig tiny_config(std::size_t d = 8, std::size_t classes = 3) {
  ModelConfig c;
  c.embedding_dim = d;
  c.num_classes = classes;
  c.kernel_widths = {2, 3};
  c.filters_per_width = 2;
  return c;
}

// Glorot weights plus nonzero random biases so no ReLU sits exactly at 0.
inline ClassifierModel random_model(const ModelConfig& config, std::uint64_t seed) {
  ClassifierModel m = ClassifierModel::initialize(config, seed);
  Rng rng(seed ^ 0xabcdefULL);
  for (ConvBlock& b : m.conv) {
    for (double& x : b.bias) x = rng.uniform(-0.3, 0.3);
  }
  for (double& x : m.dense_bias) x = rng.uniform(-0.3, 0.3);
  return m;
}

inline Matrix random_input(std::size_t rows, std::size_t d, Rng& rng) {
  Matrix x(rows, d);
  for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
  return x;
}

inline Vector random_distribution(std::size_t n, Rng& rng) {
  Vector t(n);
  double total = 0.0;
  for (double& v : t) total += (v = rng.uniform(0.05, 1.0));
  for (double& v : t) v /= total;
  return t;
}

// Two classes separated by one planted keyword each; other words are noise
// living in coordinates the keywords do not use.
inline std::vector<Example> planted_keyword_examples(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const std::size_t label = i % 2;
    const std::size_t n = 4 + rng.below(6);
    Matrix x(n, 4);
    for (std::size_t r = 0; r < n; ++r) {
      x(r, 2) = rng.uniform(-1.0, 1.0);
      x(r, 3) = rng.uniform(-1.0, 1.0);
    }
    const std::size_t at = rng.below(n);
    x(at, 2) = x(at, 3) = 0.0;
    x(at, label) = 1.0;
    out.push_back(Example{x, one_hot(label, 2), label});
  }
  return out;
}

// Written out loop by loop, sharing nothing with the library's forward pass.
inline Vector naive_probabilities(const ClassifierModel& m, const Matrix& x) {
  const std::size_t d = m.embedding_dim;
  const std::size_t n = std::max<std::size_t>(
      x.rows(), *std::max_element(m.kernel_widths.begin(), m.kernel_widths.end()));
  std::vector<double> features;
  for (std::size_t b = 0; b < m.kernel_widths.size(); ++b) {
    const std::size_t w = m.kernel_widths[b];
    for (std::size_t f = 0; f < m.filters_per_width; ++f) {
      double best = -INFINITY;
      for (std::size_t p = 0; p + w <= n; ++p) {
        double s = m.conv[b].bias[f];
        for (std::size_t k = 0; k < w; ++k) {
          for (std::size_t j = 0; j < d; ++j) {
            const double xv = p + k < x.rows() ? x(p + k, j) : 0.0;
            s += xv * m.conv[b].weights(k * d + j, f);
          }
        }
        best = std::max(best, s);
      }
      features.push_back(best > 0.0 ? best : 0.0);
    }
  }
  std::vector<double> z(m.num_classes);
  for (std::size_t c = 0; c < m.num_classes; ++c) {
    z[c] = m.dense_bias[c];
    for (std::size_t i = 0; i < features.size(); ++i) z[c] += features[i] * m.dense_weights(i, c);
    z[c] /= m.temperature;
  }
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) total += (v = std::exp(v - top));
  for (double& v : z) v /= total;
  return z;
}

inline double naive_loss(const ClassifierModel& m, const Matrix& x, const Vector& target) {
  const Vector p = naive_probabilities(m, x);
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) loss -= target[i] * std::log(std::max(p[i], 1e-12));
  return loss;
}

struct GradCheckStats {
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates where +-h crosses a kink
  std::size_t failures = 0;
  double worst = 0.0;
  std::string first_failure;
};

// |a - n| / max(|a|, |n|); tiny magnitudes are judged by absolute difference.
inline double gradient_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-7) return std::abs(analytic - numeric) < 1e-7 ? 0.0 : 1.0;
  return std::abs(analytic - numeric) / scale;
}

namespace detail {

struct Pattern {
  std::vector<std::vector<std::size_t>> argmax;
  std::vector<bool> active;
  bool operator==(const Pattern&) const = default;
};

inline Pattern pattern_of(const ForwardTrace& t) {
  Pattern p{t.argmax, {}};
  for (double v : t.pooled_max) p.active.push_back(v > 0.0);
  return p;
}

}  // namespace detail

// Central differences on every weight, bias and input coordinate.
inline GradCheckStats check_gradients(const ClassifierModel& model, const Matrix& x,
                                      const Vector& target, Mode mode,
                                      std::optional<std::uint64_t> seed, double h = 1e-4,
                                      double tolerance = 1e-3) {
  const ForwardTrace base = forward(model, x, mode, seed);
  const GradientSet g = backward(model, x, base, target);
  const detail::Pattern reference = detail::pattern_of(base);
  GradCheckStats stats;

  const auto probe = [&](const ClassifierModel& m, const Matrix& in, double& loss) {
    const ForwardTrace t = forward(m, in, mode, seed);
    loss = cross_entropy(t.probabilities, target);
    return detail::pattern_of(t) == reference;
  };
  const auto record = [&](double analytic, double lp, double lm, bool smooth,
                          const std::string& name) {
    if (!smooth) {
      ++stats.skipped;
      return;
    }
    const double numeric = (lp - lm) / (2.0 * h);
    const double err = gradient_error(analytic, numeric);
    ++stats.checked;
    stats.worst = std::max(stats.worst, err);
    if (err >= tolerance) {
      if (stats.failures++ == 0) {
        stats.first_failure = name + ": analytic " + std::to_string(analytic) + " numeric " +
                              std::to_string(numeric);
      }
    }
  };
  const auto check_param = [&](const std::function<double&(ClassifierModel&)>& at,
                               double analytic, const std::string& name) {
    ClassifierModel plus = model, minus = model;
    at(plus) += h;
    at(minus) -= h;
    double lp = 0.0, lm = 0.0;
    const bool smooth = probe(plus, x, lp) & probe(minus, x, lm);
    record(analytic, lp, lm, smooth, name);
  };

  for (std::size_t b = 0; b < model.conv.size(); ++b) {
    for (std::size_t i = 0; i < model.conv[b].weights.size(); ++i) {
      check_param([&](ClassifierModel& m) -> double& { return m.conv[b].weights.values()[i]; },
                  g.conv_weights[b].values()[i], "conv" + std::to_string(b) + "[" + std::to_string(i) + "]");
    }
    for (std::size_t f = 0; f < model.conv[b].bias.size(); ++f) {
      check_param([&](ClassifierModel& m) -> double& { return m.conv[b].bias[f]; },
                  g.conv_bias[b][f], "conv_bias" + std::to_string(b) + "[" + std::to_string(f) + "]");
    }
  }
  for (std::size_t i = 0; i < model.dense_weights.size(); ++i) {
    check_param([&](ClassifierModel& m) -> double& { return m.dense_weights.values()[i]; },
                g.dense_weights.values()[i], "dense[" + std::to_string(i) + "]");
  }
  for (std::size_t c = 0; c < model.dense_bias.size(); ++c) {
    check_param([&](ClassifierModel& m) -> double& { return m.dense_bias[c]; }, g.dense_bias[c],
                "dense_bias[" + std::to_string(c) + "]");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    Matrix plus = x, minus = x;
    plus.values()[i] += h;
    minus.values()[i] -= h;
    double lp = 0.0, lm = 0.0;
    const bool smooth = probe(model, plus, lp) & probe(model, minus, lm);
    record(g.input_gradient.values()[i], lp, lm, smooth, "input[" + std::to_string(i) + "]");
  }
  return stats;
}

// Replays an attack trace and reports the first inconsistency, if any.
inline std::optional<std::string> replay_violation(const ClassifierModel& model,
                                                   const AttackResult& r,
                                                   const EmbeddingTable& table) {
  if (r.num_changes != r.edits.size()) return "num_changes differs from edit count";
  Document doc = r.original_document;
  std::vector<double> logp;
  logp.push_back(*log_probability_of(model, doc, table, r.original_class));
  for (const EditOp& e : r.edits) {
    if (e.kind == EditKind::remove && doc.tokens.at(e.position).pos != PosTag::adverb) {
      return "deleted a non-adverb";
    }
    if (e.kind == EditKind::insert_before &&
        (!e.new_word || e.new_word->pos != PosTag::adverb ||
         doc.tokens.at(e.position).pos != PosTag::adjective)) {
      return "insert_before outside the adjective/adverb rule";
    }
    doc = apply_edit(doc, e);
    const auto lp = log_probability_of(model, doc, table, r.original_class);
    if (!lp) return "edit left no embeddable token";
    logp.push_back(*lp);
  }
  if (!(doc == r.final_document)) return "replay does not reproduce final_document";
  for (std::size_t i = 1; i < logp.size(); ++i) {
    if (!(logp[i] < logp[i - 1])) return "true-class probability not strictly decreasing";
    if (i < r.true_class_probability.size() &&
        !(r.true_class_probability[i] <= r.true_class_probability[i - 1])) {
      return "recorded true-class probability increases";
    }
  }
  const std::size_t final_pred = predict(model, embed(doc, table).matrix);
  if (r.success && final_pred == r.original_class) return "success without a flipped prediction";
  if (final_pred != r.final_class) return "final_class does not match the replayed prediction";
  return std::nullopt;
}

// Brute-force statistics: counts every value explicitly.
inline ChangeSummary brute_force_summary(const std::vector<std::size_t>& values) {
  std::map<std::size_t, std::size_t> counts;
  std::size_t total = 0;
  for (std::size_t v : values) {
    ++counts[v];
    total += v;
  }
  ChangeSummary s;
  s.mean = static_cast<double>(total) / static_cast<double>(values.size());
  const std::size_t rank = (values.size() - 1) / 2;  // lower middle, 0-based
  std::size_t seen = 0;
  for (const auto& [v, c] : counts) {
    if (seen + c > rank) {
      s.median = v;
      break;
    }
    seen += c;
  }
  std::size_t best = 0;
  for (const auto& [v, c] : counts) {
    if (c > best) {
      best = c;
      s.mode = v;
    }
  }
  return s;
}

}  // namespace advtext::testing
