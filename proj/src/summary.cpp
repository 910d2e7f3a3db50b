#include "ataseg/summary.hpp"

#include "ataseg/error.hpp"
#include "ataseg/io.hpp"

namespace ataseg {

using nlohmann::json;

namespace {

json iou_array(const MiouResult& m) {
  json out = json::array();
  for (const auto& v : m.per_class) out.push_back(v ? json(*v) : json(nullptr));
  return out;
}

}  // namespace

std::vector<ConfusionMatrix> domain_confusion(const std::vector<FrameRecord>& records,
                                              int num_domains, int num_classes) {
  std::vector<ConfusionMatrix> out(num_domains, ConfusionMatrix(num_classes));
  for (const auto& r : records) {
    if (r.domain_id < 0 || r.domain_id >= num_domains) {
      throw UsageError("record domain id out of range");
    }
    out[r.domain_id] += r.confusion_delta;
  }
  return out;
}

double domain_average_miou(const std::vector<ConfusionMatrix>& per_domain) {
  if (per_domain.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& cm : per_domain) sum += miou(cm).mean;
  return sum / static_cast<double>(per_domain.size());
}

ClassFrequencyTracker label_histogram(const std::vector<FrameRecord>& records, int num_classes) {
  ClassFrequencyTracker t(num_classes);
  for (const auto& r : records) t.add(r.selected);
  return t;
}

json summarize(const std::vector<FrameRecord>& records, const StreamSpec& stream,
               const RunLabel& label) {
  json s;
  s["format_version"] = kFormatVersion;
  s["adapter"] = label.adapter;
  s["annotator"] = label.annotator;
  s["budget"] = label.budget;
  s["seed"] = label.seed;
  s["lr"] = label.lr;
  s["protocol"] = to_string(stream.protocol);
  s["frames"] = records.size();
  s["no_data"] = records.empty();
  if (records.empty()) return s;

  const int classes = stream.num_classes;
  const int domains = stream.num_domains();
  auto per_domain = domain_confusion(records, domains, classes);
  ConfusionMatrix cumulative(classes);
  for (const auto& cm : per_domain) cumulative += cm;
  const auto cum = miou(cumulative);
  s["miou_cumulative"] = cum.mean;
  s["per_class_cumulative"] = iou_array(cum);
  s["miou_domain_avg"] = domain_average_miou(per_domain);

  std::vector<double> loss_sum(domains, 0.0);
  std::vector<int> frames(domains, 0);
  json curve_total = json::array(), curve_ce = json::array(), curve_ent = json::array(),
       curve_cst = json::array(), curve_miou = json::array();
  int adapted = 0, skipped = 0;
  std::vector<std::vector<Pixel>> selections;
  for (const auto& r : records) {
    loss_sum[r.domain_id] += r.losses.total;
    ++frames[r.domain_id];
    curve_total.push_back(r.losses.total);
    curve_ce.push_back(r.losses.ce + r.losses.ce_aug);
    curve_ent.push_back(r.losses.ent);
    curve_cst.push_back(r.losses.cst);
    curve_miou.push_back(r.miou_cum);
    adapted += r.adapted ? 1 : 0;
    skipped += r.oracle_failed ? 1 : 0;
    std::vector<Pixel> px;
    for (const auto& e : r.selected.entries) px.push_back({e.row, e.col});
    selections.push_back(std::move(px));
  }
  s["frames_adapted"] = adapted;
  s["frames_skipped_oracle"] = skipped;

  json dom = json::array();
  for (int d = 0; d < domains; ++d) {
    const auto m = miou(per_domain[d]);
    const auto& seg = stream.segments[d].corruption;
    dom.push_back({{"domain", d},
                   {"corruption", to_string(seg.kind)},
                   {"severity", seg.severity},
                   {"frames", frames[d]},
                   {"miou", m.mean},
                   {"per_class", iou_array(m)},
                   {"mean_loss", frames[d] ? loss_sum[d] / frames[d] : 0.0}});
  }
  s["per_domain"] = dom;
  s["loss_curves"] = {{"total", curve_total},
                      {"ce", curve_ce},
                      {"ent", curve_ent},
                      {"cst", curve_cst},
                      {"miou_cum", curve_miou}};

  const auto hist = label_histogram(records, classes);
  s["labels_total"] = hist.total();
  s["label_counts"] = hist.counts();
  const auto imb = imbalance_degree(hist);
  s["imbalance_degree"] = imb ? json(*imb) : json(nullptr);
  const auto div = spatial_diversity(selections);
  s["spatial_diversity"] = {{"stream_mean", div.stream_mean},
                            {"mean_including_flagged", div.mean_including_flagged},
                            {"flagged_frames", div.flagged_frames}};
  return s;
}

std::vector<std::vector<double>> forgetting_eval(
    const std::vector<SegNet>& snapshots,
    const std::vector<std::vector<StreamFrame>>& domains, bool flip_ensemble) {
  std::vector<std::vector<double>> matrix;
  for (const auto& net : snapshots) {
    std::vector<double> row;
    for (const auto& frames : domains) {
      if (frames.empty()) {
        row.push_back(0.0);
        continue;
      }
      ConfusionMatrix cm(frames.front().scene.num_classes);
      for (const auto& f : frames) {
        cm.add_frame(f.scene.labels, predict(net, f.scene.image, flip_ensemble).hard_labels());
      }
      row.push_back(miou(cm).mean);
    }
    matrix.push_back(std::move(row));
  }
  return matrix;
}

}  // namespace ataseg
