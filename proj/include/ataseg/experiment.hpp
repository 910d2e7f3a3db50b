#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ataseg/adapter.hpp"
#include "ataseg/config.hpp"
#include "ataseg/pretrain.hpp"

namespace ataseg {

// Builds the source network: loads source.checkpoint when set, otherwise
// pretrains on a generated clean dataset.
SegNet build_source(const SourceConfig& source, int num_classes, int height, int width,
                    PretrainReport* report = nullptr);

// Like build_source, but pretrained networks are cached under cache_dir keyed
// by every field that affects them.
SegNet cached_source(const SourceConfig& source, int num_classes, int height, int width,
                     const std::filesystem::path& cache_dir);

// Stream of one run seed.
StreamSpec stream_for_seed(const StreamSpec& base, std::uint64_t seed);

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<FrameRecord> records;
  std::vector<FrameRecord> source_records;  // frozen source on the same frames
  nlohmann::json summary;
  SegNet net;  // adapted network after the last frame
  AdamState adam;
};

// One adaptation run over the stream of `seed`. With evaluate_source the
// frozen network is scored on the same frames and the summary reports the
// comparison, including an error_accumulation flag when the adapted model
// ends the last domain below the frozen one. oracle defaults to ground truth.
RunResult run_experiment(const ExperimentConfig& cfg, const SegNet& source, std::uint64_t seed,
                         Oracle* oracle = nullptr, const FrameObserver& observer = {});

// config.json, frames.csv, summary.json and checkpoint.bin.
void write_run_artifacts(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                         const RunResult& run);

// Files a run directory must contain.
const std::vector<std::string>& run_artifact_names();

struct SweepCell {
  std::string name;
  ExperimentConfig config;
  std::vector<int> domain_order;  // empty when the stream order is unchanged
};

// Cartesian product of the non-empty grid axes over the base config.
// suppression_k values are given at 960-pixel width and rescaled to the
// stream width.
std::vector<SweepCell> expand_sweep(const ExperimentConfig& base);

struct SweepRow {
  std::string cell;
  std::uint64_t seed = 0;
  nlohmann::json summary;
};

// Runs every cell for every seed, writes <output_dir>/<cell>/seed_<s>/ run
// directories and the merged <output_dir>/sweep.csv.
std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const SegNet& source,
                                const std::filesystem::path& output_dir);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

struct ForgettingResult {
  std::vector<std::string> domains;
  std::vector<double> source;                // frozen source on each domain
  std::vector<std::vector<double>> matrix;  // after domain i, evaluated on j
  std::vector<double> online;               // online mIoU per domain during the run
};

// Adapts over the stream of `seed`, snapshots the network at the end of every
// domain and re-evaluates each snapshot on every domain without updates.
ForgettingResult run_forgetting(const ExperimentConfig& cfg, const SegNet& source,
                                std::uint64_t seed);

void write_forgetting_csv(const std::filesystem::path& path, const ForgettingResult& result);

// Plot-ready tables derived from a merged sweep table: budget curve (median
// over seeds per adapter/annotator/budget) and imbalance-diversity scatter.
void export_sweep_tables(const std::filesystem::path& sweep_csv,
                         const std::filesystem::path& out_dir);

}  // namespace ataseg
