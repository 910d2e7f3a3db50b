#include "ataseg/annotator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ataseg/error.hpp"
#include "ataseg/losses.hpp"

namespace ataseg {
namespace {

double pixel_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(std::max(v, kLogFloor));
  }
  return h;
}

ActiveScoreMap shaped_like(const PredictionMap& p) {
  return ActiveScoreMap(static_cast<int>(p.height()), static_cast<int>(p.width()));
}

}  // namespace

void ClassFrequencyTracker::add(int class_id) {
  if (class_id < 0 || class_id >= num_classes()) {
    throw UsageError("tracker: class id " + std::to_string(class_id) + " out of range");
  }
  ++counts_[class_id];
  ++total_;
}

void ClassFrequencyTracker::add(const ActiveLabelSet& labels) {
  for (const auto& e : labels.entries) add(e.class_id);
}

double ClassFrequencyTracker::frequency(int class_id) const {
  if (total_ == 0) return 0.0;
  return static_cast<double>(counts_.at(class_id)) / static_cast<double>(total_);
}

std::string to_string(AnnotatorKind kind) {
  switch (kind) {
    case AnnotatorKind::kRand: return "rand";
    case AnnotatorKind::kEnt: return "ent";
    case AnnotatorKind::kRipu: return "ripu";
    case AnnotatorKind::kBvsb: return "bvsb";
  }
  return "bvsb";
}

AnnotatorKind annotator_from_string(const std::string& name) {
  if (name == "rand") return AnnotatorKind::kRand;
  if (name == "ent") return AnnotatorKind::kEnt;
  if (name == "ripu") return AnnotatorKind::kRipu;
  if (name == "bvsb") return AnnotatorKind::kBvsb;
  throw ConfigError("unknown annotator '" + name + "' (rand|ent|ripu|bvsb)");
}

std::string to_string(ImbalanceMode mode) {
  switch (mode) {
    case ImbalanceMode::kNone: return "none";
    case ImbalanceMode::kMultiplicative: return "multiplicative";
    case ImbalanceMode::kBlend: return "blend";
  }
  return "none";
}

ImbalanceMode imbalance_from_string(const std::string& name) {
  if (name == "none") return ImbalanceMode::kNone;
  if (name == "multiplicative") return ImbalanceMode::kMultiplicative;
  if (name == "blend") return ImbalanceMode::kBlend;
  throw ConfigError("unknown imbalance mode '" + name + "' (none|multiplicative|blend)");
}

void AnnotatorSpec::validate() const {
  if (ripu_k < 0) throw ConfigError("annotator.ripu_k must be >= 0");
  if (suppression_k && (*suppression_k < 1 || *suppression_k % 2 == 0)) {
    throw ConfigError("annotator.suppression_k must be a positive odd integer");
  }
  if (imbalance_omega < 0.0 || imbalance_omega > 1.0) {
    throw ConfigError("annotator.imbalance_omega must lie in [0, 1]");
  }
}

ActiveScoreMap score_rand(int height, int width, Rng& rng) {
  ActiveScoreMap a(height, width);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : a.values) v = unit(rng);
  return a;
}

ActiveScoreMap score_ent(const PredictionMap& p) {
  ActiveScoreMap a = shaped_like(p);
  for (int r = 0; r < a.height; ++r)
    for (int c = 0; c < a.width; ++c) a.at(r, c) = pixel_entropy(p.pixel(r, c));
  return a;
}

ActiveScoreMap score_bvsb(const PredictionMap& p) {
  if (p.classes() < 2) throw ConfigError("BvSB needs at least two classes");
  ActiveScoreMap a = shaped_like(p);
  for (int r = 0; r < a.height; ++r) {
    for (int c = 0; c < a.width; ++c) {
      double best = -1.0, second = -1.0;
      for (double v : p.pixel(r, c)) {
        if (v > best) {
          second = best;
          best = v;
        } else if (v > second) {
          second = v;
        }
      }
      a.at(r, c) = -(best - second);
    }
  }
  return a;
}

ActiveScoreMap score_ripu(const PredictionMap& p, int k) {
  if (k < 0) throw ConfigError("RIPU neighbourhood k must be >= 0");
  const int h = static_cast<int>(p.height());
  const int w = static_cast<int>(p.width());
  const int classes = static_cast<int>(p.classes());
  const auto hard = p.hard_labels();
  // integral[c][(r)*(w+1)+col] = count of class c in rows < r, cols < col
  const std::size_t stride = static_cast<std::size_t>(w) + 1;
  std::vector<std::int64_t> integral(static_cast<std::size_t>(classes) * (h + 1) * stride, 0);
  auto cell = [&](int c, int r, int col) -> std::int64_t& {
    return integral[(static_cast<std::size_t>(c) * (h + 1) + r) * stride + col];
  };
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      const int label = hard[static_cast<std::size_t>(r) * w + col];
      for (int c = 0; c < classes; ++c) {
        cell(c, r + 1, col + 1) = cell(c, r, col + 1) + cell(c, r + 1, col) -
                                  cell(c, r, col) + (label == c ? 1 : 0);
      }
    }
  }
  ActiveScoreMap a(h, w);
  for (int r = 0; r < h; ++r) {
    const int r0 = std::max(0, r - k), r1 = std::min(h - 1, r + k);
    for (int col = 0; col < w; ++col) {
      const int c0 = std::max(0, col - k), c1 = std::min(w - 1, col + k);
      const double n = static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
      double impurity = 0.0;
      for (int c = 0; c < classes; ++c) {
        const std::int64_t cnt = cell(c, r1 + 1, c1 + 1) - cell(c, r0, c1 + 1) -
                                 cell(c, r1 + 1, c0) + cell(c, r0, c0);
        if (cnt > 0) {
          const double q = static_cast<double>(cnt) / n;
          impurity -= q * std::log(q);
        }
      }
      a.at(r, col) = impurity * pixel_entropy(p.pixel(r, col));
    }
  }
  return a;
}

ActiveScoreMap apply_imbalance(const ActiveScoreMap& scores,
                               const PredictionMap& p,
                               const ClassFrequencyTracker& tracker,
                               ImbalanceMode mode, double omega) {
  if (omega < 0.0 || omega > 1.0) throw ConfigError("imbalance omega must lie in [0, 1]");
  if (mode == ImbalanceMode::kNone) return scores;
  if (tracker.num_classes() != static_cast<int>(p.classes())) {
    throw UsageError("tracker class count does not match prediction map");
  }
  ActiveScoreMap out = scores;
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      const double rarity = 1.0 - tracker.frequency(p.argmax(r, c));
      if (mode == ImbalanceMode::kMultiplicative) {
        out.at(r, c) = scores.at(r, c) * rarity;
      } else {
        out.at(r, c) = (1.0 - omega) * scores.at(r, c) + omega * rarity;
      }
    }
  }
  return out;
}

std::vector<Pixel> select(const ActiveScoreMap& scores, int budget,
                          std::optional<int> suppression_k) {
  if (budget < 0) throw UsageError("select: budget must be >= 0");
  if (suppression_k && (*suppression_k < 1 || *suppression_k % 2 == 0)) {
    throw ConfigError("select: suppression_k must be a positive odd integer");
  }
  std::vector<Pixel> picked;
  if (budget == 0 || scores.values.empty()) return picked;
  std::vector<std::size_t> order(scores.values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores.values[a] > scores.values[b];
  });
  std::vector<char> blocked(scores.values.size(), 0);
  const int half = suppression_k ? *suppression_k / 2 : 0;
  for (std::size_t idx : order) {
    if (blocked[idx]) continue;
    const int r = static_cast<int>(idx) / scores.width;
    const int c = static_cast<int>(idx) % scores.width;
    picked.push_back({r, c});
    if (static_cast<int>(picked.size()) == budget) break;
    blocked[idx] = 1;
    for (int rr = std::max(0, r - half); rr <= std::min(scores.height - 1, r + half); ++rr)
      for (int cc = std::max(0, c - half); cc <= std::min(scores.width - 1, c + half); ++cc)
        blocked[static_cast<std::size_t>(rr) * scores.width + cc] = 1;
  }
  return picked;
}

Annotation annotate(const AnnotatorSpec& spec, const PredictionMap& p,
                    const ClassFrequencyTracker& tracker, Rng& rng, int budget) {
  spec.validate();
  Annotation out;
  switch (spec.kind) {
    case AnnotatorKind::kRand:
      out.scores = score_rand(static_cast<int>(p.height()), static_cast<int>(p.width()), rng);
      break;
    case AnnotatorKind::kEnt:
      out.scores = score_ent(p);
      break;
    case AnnotatorKind::kRipu:
      out.scores = score_ripu(p, spec.ripu_k);
      break;
    case AnnotatorKind::kBvsb:
      out.scores = score_bvsb(p);
      break;
  }
  if (spec.imbalance != ImbalanceMode::kNone) {
    out.scores = apply_imbalance(out.scores, p, tracker, spec.imbalance, spec.imbalance_omega);
  }
  out.selected = select(out.scores, budget, spec.suppression_k);
  return out;
}

int scaled_suppression_k(int k_at_960, int width) {
  const double x = static_cast<double>(k_at_960) * width / 960.0;
  const int k = 2 * static_cast<int>(std::lround((x - 1.0) / 2.0)) + 1;
  return std::max(1, k);
}

}  // namespace ataseg
