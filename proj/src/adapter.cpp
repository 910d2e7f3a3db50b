#include "ataseg/adapter.hpp"

#include <chrono>
#include <cmath>

#include "ataseg/error.hpp"

namespace ataseg {
namespace {

using Clock = std::chrono::steady_clock;

struct Views {
  ForwardResult original;
  std::optional<ForwardResult> flipped;
  PredictionMap p;
  std::optional<PredictionMap> p_aug;  // aligned to original coordinates
  PredictionMap eval;                  // what annotation and scoring read
};

Views run_views(const SegNet& net, const Tensor& image, bool two_views) {
  Views v;
  v.original = forward(net, image);
  v.p = softmax_pixels(v.original.logits);
  if (two_views) {
    v.flipped = forward(net, flip_horizontal(image));
    v.p_aug = softmax_pixels(flip_horizontal(v.flipped->logits));
    v.eval = average(v.p, *v.p_aug);
  } else {
    v.eval = v.p;
  }
  return v;
}

void score_frame(Session& session, const StreamFrame& frame,
                 const PredictionMap& eval, FrameRecord& rec) {
  const int classes = frame.scene.num_classes;
  rec.frame_id = frame.frame_id;
  rec.domain_id = frame.domain_id;
  rec.prediction = eval.hard_labels();
  rec.confusion_delta = ConfusionMatrix(classes);
  rec.confusion_delta.add_frame(frame.scene.labels, rec.prediction);
  if (session.cumulative.num_classes() == 0) session.cumulative = ConfusionMatrix(classes);
  session.cumulative += rec.confusion_delta;
  if (static_cast<int>(session.per_domain.size()) <= frame.domain_id) {
    session.per_domain.resize(frame.domain_id + 1, ConfusionMatrix(classes));
  }
  session.per_domain[frame.domain_id] += rec.confusion_delta;
  rec.miou_cum = miou(session.cumulative).mean;
  rec.miou_domain = miou(session.per_domain[frame.domain_id]).mean;
}

std::vector<Pixel> all_pixels(int h, int w) {
  std::vector<Pixel> out;
  out.reserve(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out.push_back({r, c});
  return out;
}

// Asks the oracle; returns false (and marks the record) if it failed.
bool acquire_labels(Oracle& oracle, const StreamFrame& frame,
                    const std::vector<Pixel>& query, FrameRecord& rec) {
  rec.selected.frame_id = frame.frame_id;
  if (query.empty()) return true;
  auto answer = oracle.answer(frame, query);
  if (!answer) {
    rec.oracle_failed = true;
    return false;
  }
  if (answer->size() != query.size()) {
    throw UsageError("oracle answered " + std::to_string(answer->size()) +
                     " labels for " + std::to_string(query.size()) + " queried pixels");
  }
  for (std::size_t i = 0; i < query.size(); ++i) {
    const int cls = (*answer)[i];
    if (cls < 0 || cls >= frame.scene.num_classes) {
      throw UsageError("oracle answered out-of-range class " + std::to_string(cls));
    }
    rec.selected.entries.push_back({query[i].row, query[i].col, cls});
  }
  return true;
}

void check_finite(const LossBreakdown& loss, std::int64_t frame_id) {
  if (!std::isfinite(loss.total)) {
    throw DivergenceError("non-finite loss at frame " + std::to_string(frame_id));
  }
}

void apply_update(Session& session, std::vector<double>& grad) {
  adam_step(session.net.mutable_params(), grad, session.adam);
}

StepResult adapt_frame(Session& session, const StreamFrame& frame,
                       const AdapterSpec& adapter, const AnnotatorSpec* annotator,
                       Oracle& oracle, bool dense, bool two_views) {
  const auto start = Clock::now();
  Views views = run_views(session.net, frame.scene.image, two_views);
  StepResult result;
  FrameRecord& rec = result.record;
  score_frame(session, frame, views.eval, rec);

  std::vector<Pixel> query;
  if (dense) {
    query = all_pixels(frame.scene.height(), frame.scene.width());
  } else if (adapter.budget > 0 && annotator != nullptr) {
    query = annotate(*annotator, views.eval, session.tracker, session.annotator_rng,
                     adapter.budget)
                .selected;
  }

  if (acquire_labels(oracle, frame, query, rec)) {
    if (!dense) session.tracker.add(rec.selected);
    std::vector<double> grad;
    if (two_views) {
      auto obj = objective_b1(views.p, *views.p_aug, rec.selected, adapter.lambda_ent,
                              adapter.lambda_cst, adapter.cst_kind,
                              adapter.detach_cst_target);
      check_finite(obj.loss, frame.frame_id);
      rec.losses = obj.loss;
      grad = backward(session.net, std::move(views.original.tape), obj.dloss_dlogits);
      auto grad_aug = backward(session.net, std::move(views.flipped->tape),
                               flip_horizontal(obj.dloss_dlogits_aug));
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += grad_aug[i];
    } else {
      auto obj = objective_b0(views.p, rec.selected, adapter.lambda_ent);
      check_finite(obj.loss, frame.frame_id);
      rec.losses = obj.loss;
      grad = backward(session.net, std::move(views.original.tape), obj.dloss_dlogits);
    }
    apply_update(session, grad);
    rec.adapted = true;
  }
  ++session.frames_seen;
  result.prediction = std::move(views.eval);
  rec.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

}  // namespace

std::optional<std::vector<int>> SimulatedOracle::answer(const StreamFrame& frame,
                                                        std::span<const Pixel> query) {
  std::vector<int> out;
  out.reserve(query.size());
  for (const auto& px : query) out.push_back(frame.scene.label(px.row, px.col));
  return out;
}

std::optional<std::vector<int>> ScriptedOracle::answer(const StreamFrame& frame,
                                                       std::span<const Pixel> query) {
  auto it = answers_.find(frame.frame_id);
  if (it == answers_.end() || it->second.size() != query.size()) return std::nullopt;
  return it->second;
}

std::string to_string(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::kB0: return "b0";
    case AdapterKind::kB1: return "b1";
    case AdapterKind::kB0NoLabel: return "b0_nolabel";
    case AdapterKind::kB1NoLabel: return "b1_nolabel";
    case AdapterKind::kFullyB0: return "fully_b0";
    case AdapterKind::kFullyB1: return "fully_b1";
  }
  return "b1";
}

AdapterKind adapter_from_string(const std::string& name) {
  for (auto k : {AdapterKind::kB0, AdapterKind::kB1, AdapterKind::kB0NoLabel,
                 AdapterKind::kB1NoLabel, AdapterKind::kFullyB0, AdapterKind::kFullyB1}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown adapter '" + name +
                    "' (b0|b1|b0_nolabel|b1_nolabel|fully_b0|fully_b1)");
}

bool uses_flip_view(AdapterKind kind) {
  return kind == AdapterKind::kB1 || kind == AdapterKind::kB1NoLabel ||
         kind == AdapterKind::kFullyB1;
}

bool is_no_label(AdapterKind kind) {
  return kind == AdapterKind::kB0NoLabel || kind == AdapterKind::kB1NoLabel;
}

bool is_fully(AdapterKind kind) {
  return kind == AdapterKind::kFullyB0 || kind == AdapterKind::kFullyB1;
}

void AdapterSpec::validate() const {
  if (budget < 0) throw ConfigError("adapter.budget must be >= 0");
  if (!is_fully(kind) && (budget == 0) != is_no_label(kind)) {
    throw ConfigError("adapter.budget must be 0 exactly for the no-label adapters");
  }
  if (!std::isfinite(lambda_ent) || !std::isfinite(lambda_cst) || lambda_ent < 0.0 ||
      lambda_cst < 0.0) {
    throw ConfigError("adapter lambdas must be finite and non-negative");
  }
}

Session::Session(SegNet net_in, const AdamConfig& optimizer, std::uint64_t annotator_seed)
    : net(std::move(net_in)),
      adam(AdamState::fresh(net.param_count(), optimizer)),
      tracker(net.num_classes()),
      annotator_rng(mix_seed(annotator_seed, seed_tag::kAnnotator)) {}

PredictionMap predict(const SegNet& net, const Tensor& image, bool flip_ensemble) {
  PredictionMap p = softmax_pixels(infer(net, image));
  if (!flip_ensemble) return p;
  PredictionMap pa = softmax_pixels(flip_horizontal(infer(net, flip_horizontal(image))));
  return average(p, pa);
}

StepResult step_b0(Session& session, const StreamFrame& frame,
                   const AdapterSpec& adapter, const AnnotatorSpec& annotator,
                   Oracle& oracle) {
  return adapt_frame(session, frame, adapter, &annotator, oracle, false, false);
}

StepResult step_b1(Session& session, const StreamFrame& frame,
                   const AdapterSpec& adapter, const AnnotatorSpec& annotator,
                   Oracle& oracle) {
  return adapt_frame(session, frame, adapter, &annotator, oracle, false, true);
}

StepResult step_fully(Session& session, const StreamFrame& frame,
                      const AdapterSpec& adapter, Oracle& oracle) {
  return adapt_frame(session, frame, adapter, nullptr, oracle, true,
                     uses_flip_view(adapter.kind));
}

StepResult step(Session& session, const StreamFrame& frame, const AdapterSpec& adapter,
                const AnnotatorSpec& annotator, Oracle& oracle) {
  if (is_fully(adapter.kind)) return step_fully(session, frame, adapter, oracle);
  if (uses_flip_view(adapter.kind)) return step_b1(session, frame, adapter, annotator, oracle);
  return step_b0(session, frame, adapter, annotator, oracle);
}

std::vector<FrameRecord> run_stream(Session& session, const std::vector<StreamFrame>& stream,
                                    const AdapterSpec& adapter, const AnnotatorSpec& annotator,
                                    Oracle& oracle, const FrameObserver& observer) {
  if (stream.empty()) throw UsageError("run_stream: stream is empty");
  adapter.validate();
  annotator.validate();
  std::vector<FrameRecord> records;
  records.reserve(stream.size());
  for (const auto& frame : stream) {
    auto res = step(session, frame, adapter, annotator, oracle);
    if (observer) observer(res.record, session);
    records.push_back(std::move(res.record));
  }
  return records;
}

std::vector<FrameRecord> evaluate_frozen(const SegNet& net,
                                         const std::vector<StreamFrame>& stream,
                                         bool flip_ensemble) {
  Session session(net, AdamConfig{}, 0);
  std::vector<FrameRecord> records;
  records.reserve(stream.size());
  for (const auto& frame : stream) {
    const auto start = Clock::now();
    FrameRecord rec;
    score_frame(session, frame, predict(net, frame.scene.image, flip_ensemble), rec);
    rec.selected.frame_id = frame.frame_id;
    rec.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace ataseg
