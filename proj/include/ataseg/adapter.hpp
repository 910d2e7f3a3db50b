#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ataseg/adam.hpp"
#include "ataseg/annotator.hpp"
#include "ataseg/losses.hpp"
#include "ataseg/metrics.hpp"
#include "ataseg/segnet.hpp"
#include "ataseg/stream.hpp"

namespace ataseg {

// Label source for pixel queries.
class Oracle {
 public:
  virtual ~Oracle() = default;
  // Class ids for `query`, in query order, or nullopt if the oracle failed
  // or timed out.
  virtual std::optional<std::vector<int>> answer(const StreamFrame& frame,
                                                 std::span<const Pixel> query) = 0;
};

// Answers from the frame's ground-truth label map.
class SimulatedOracle : public Oracle {
 public:
  std::optional<std::vector<int>> answer(const StreamFrame& frame,
                                         std::span<const Pixel> query) override;
};

// Replays recorded answers keyed by frame id. Unknown frames fail.
class ScriptedOracle : public Oracle {
 public:
  void script(std::int64_t frame_id, std::vector<int> classes) {
    answers_[frame_id] = std::move(classes);
  }
  std::optional<std::vector<int>> answer(const StreamFrame& frame,
                                         std::span<const Pixel> query) override;

 private:
  std::map<std::int64_t, std::vector<int>> answers_;
};

enum class AdapterKind { kB0, kB1, kB0NoLabel, kB1NoLabel, kFullyB0, kFullyB1 };

std::string to_string(AdapterKind kind);
AdapterKind adapter_from_string(const std::string& name);
bool uses_flip_view(AdapterKind kind);
bool is_no_label(AdapterKind kind);
bool is_fully(AdapterKind kind);

struct AdapterSpec {
  AdapterKind kind = AdapterKind::kB1;
  double lambda_ent = 1.0;
  double lambda_cst = 1.0;
  ConsistencyKind cst_kind = ConsistencyKind::kSce;
  int budget = 16;
  // Stop the consistency gradient into the original view.
  bool detach_cst_target = false;

  void validate() const;
};

// Mutable adaptation state: network, optimizer moments (never reset during a
// stream), label-frequency tracker and running confusion matrices.
struct Session {
  Session(SegNet net, const AdamConfig& optimizer, std::uint64_t annotator_seed);

  SegNet net;
  AdamState adam;
  ClassFrequencyTracker tracker;
  Rng annotator_rng;
  ConfusionMatrix cumulative;
  std::vector<ConfusionMatrix> per_domain;
  std::int64_t frames_seen = 0;
};

struct FrameRecord {
  std::int64_t frame_id = 0;
  int domain_id = 0;
  LossBreakdown losses;
  ActiveLabelSet selected;
  ConfusionMatrix confusion_delta;
  std::vector<int> prediction;  // hard labels from the pre-update model
  double miou_cum = 0.0;
  double miou_domain = 0.0;
  double wall_time_s = 0.0;
  bool adapted = false;
  bool oracle_failed = false;
};

struct StepResult {
  PredictionMap prediction;
  FrameRecord record;
};

// Original-view prediction, or the flip ensemble 0.5 (P + flip(P')).
PredictionMap predict(const SegNet& net, const Tensor& image, bool flip_ensemble);

// Predict, query the annotator's pixels, one Adam step on
// ce + lambda_ent * ent.
StepResult step_b0(Session& session, const StreamFrame& frame,
                   const AdapterSpec& adapter, const AnnotatorSpec& annotator,
                   Oracle& oracle);

// Two views (original and horizontal flip re-aligned), annotation and
// evaluation on their average, one Adam step on the two-view objective.
StepResult step_b1(Session& session, const StreamFrame& frame,
                   const AdapterSpec& adapter, const AnnotatorSpec& annotator,
                   Oracle& oracle);

// Supervised counterpart: every pixel is queried. Uses the B1 two-view
// objective for kFullyB1, the B0 objective otherwise.
StepResult step_fully(Session& session, const StreamFrame& frame,
                      const AdapterSpec& adapter, Oracle& oracle);

// Dispatch on adapter.kind.
StepResult step(Session& session, const StreamFrame& frame,
                const AdapterSpec& adapter, const AnnotatorSpec& annotator,
                Oracle& oracle);

using FrameObserver = std::function<void(const FrameRecord&, const Session&)>;

// Processes the stream strictly in order, one step per frame.
std::vector<FrameRecord> run_stream(Session& session,
                                    const std::vector<StreamFrame>& stream,
                                    const AdapterSpec& adapter,
                                    const AnnotatorSpec& annotator, Oracle& oracle,
                                    const FrameObserver& observer = {});

// Scores the stream with a fixed network (no updates).
std::vector<FrameRecord> evaluate_frozen(const SegNet& net,
                                         const std::vector<StreamFrame>& stream,
                                         bool flip_ensemble = false);

}  // namespace ataseg
