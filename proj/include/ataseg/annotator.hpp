#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ataseg/labels.hpp"
#include "ataseg/prediction.hpp"
#include "ataseg/rng.hpp"

namespace ataseg {

// Per-pixel active score; larger means more worth labeling.
struct ActiveScoreMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // row-major

  ActiveScoreMap() = default;
  ActiveScoreMap(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
};

// Running class histogram of every label bought so far in the stream.
class ClassFrequencyTracker {
 public:
  ClassFrequencyTracker() = default;
  explicit ClassFrequencyTracker(int num_classes) : counts_(num_classes, 0) {}

  void add(int class_id);
  void add(const ActiveLabelSet& labels);

  int num_classes() const { return static_cast<int>(counts_.size()); }
  std::int64_t total() const { return total_; }
  std::int64_t count(int class_id) const { return counts_.at(class_id); }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  // counts[c] / total, or 0 while the tracker is empty.
  double frequency(int class_id) const;

 private:
  std::vector<std::int64_t> counts_;
  std::int64_t total_ = 0;
};

enum class AnnotatorKind { kRand, kEnt, kRipu, kBvsb };

std::string to_string(AnnotatorKind kind);
AnnotatorKind annotator_from_string(const std::string& name);

enum class ImbalanceMode { kNone, kMultiplicative, kBlend };

std::string to_string(ImbalanceMode mode);
ImbalanceMode imbalance_from_string(const std::string& name);

struct AnnotatorSpec {
  AnnotatorKind kind = AnnotatorKind::kBvsb;
  int ripu_k = 1;
  std::optional<int> suppression_k;  // odd window side, when enabled
  ImbalanceMode imbalance = ImbalanceMode::kNone;
  double imbalance_omega = 0.0;  // used by kBlend
  std::uint64_t seed = 0;

  void validate() const;
};

// Scores ---------------------------------------------------------------

// i.i.d. U[0,1).
ActiveScoreMap score_rand(int height, int width, Rng& rng);

// Per-pixel predictive entropy.
ActiveScoreMap score_ent(const PredictionMap& p);

// Negated top-2 margin: the smallest margin gets the largest score.
ActiveScoreMap score_bvsb(const PredictionMap& p);

// Region impurity of the hard prediction in a (2k+1)^2 window clipped at the
// borders, times predictive entropy. Window counts come from per-class
// integral images, so cost is O(H*W*C) regardless of k.
ActiveScoreMap score_ripu(const PredictionMap& p, int k);

// Class-balance reweighting using the tracker state before this frame.
//   kMultiplicative: A * (1 - p(yhat))
//   kBlend:          (1 - omega) * A + omega * (1 - p(yhat))
ActiveScoreMap apply_imbalance(const ActiveScoreMap& scores,
                               const PredictionMap& p,
                               const ClassFrequencyTracker& tracker,
                               ImbalanceMode mode, double omega = 0.0);

// Selection ------------------------------------------------------------

// Greedy budgeted argmax over not-yet-selected pixels. Ties go to the
// smallest row-major index. With suppression_k, every pick also removes the
// k x k square centred on it from later eligibility.
std::vector<Pixel> select(const ActiveScoreMap& scores, int budget,
                          std::optional<int> suppression_k = std::nullopt);

struct Annotation {
  ActiveScoreMap scores;
  std::vector<Pixel> selected;
};

// Scores p with the configured active function, applies the imbalance
// variant if enabled and selects up to budget pixels. Does not touch the
// tracker.
Annotation annotate(const AnnotatorSpec& spec, const PredictionMap& p,
                    const ClassFrequencyTracker& tracker, Rng& rng, int budget);

// Converts a suppression window tuned for 960-pixel-wide inputs to the given
// width, rounded to the nearest odd integer (minimum 1).
int scaled_suppression_k(int k_at_960, int width);

}  // namespace ataseg
