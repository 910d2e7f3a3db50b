#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ataseg/adapter.hpp"
#include "ataseg/stream.hpp"

namespace ataseg {

// Identifiers stamped into a run summary.
struct RunLabel {
  std::string adapter = "frozen";
  std::string annotator = "none";
  int budget = 0;
  std::uint64_t seed = 0;
  double lr = 0.0;
};

// Per-domain and cumulative mIoU, loss curves, label statistics and run
// identifiers. An empty record list yields {"no_data": true, ...}. Domain
// average weights every domain equally.
nlohmann::json summarize(const std::vector<FrameRecord>& records, const StreamSpec& stream,
                         const RunLabel& label);

// Per-domain confusion matrices accumulated from records.
std::vector<ConfusionMatrix> domain_confusion(const std::vector<FrameRecord>& records,
                                              int num_domains, int num_classes);

// Equal-weight mean of per-domain mIoU.
double domain_average_miou(const std::vector<ConfusionMatrix>& per_domain);

// Class histogram of every label bought during the run.
ClassFrequencyTracker label_histogram(const std::vector<FrameRecord>& records, int num_classes);

// Row i: network snapshot taken after adapting on domain i; column j: mIoU
// of that snapshot on domain j's frames, evaluated without updates.
std::vector<std::vector<double>> forgetting_eval(
    const std::vector<SegNet>& snapshots,
    const std::vector<std::vector<StreamFrame>>& domains, bool flip_ensemble);

}  // namespace ataseg
