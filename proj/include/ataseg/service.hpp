#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ataseg/config.hpp"
#include "ataseg/segnet.hpp"

namespace ataseg {

enum class Phase { kIdle, kAwaitingLabels, kAdapting, kFinished };
std::string to_string(Phase phase);

// Human-in-the-loop session served over HTTP.
//
//   POST /api/session   start the stream (409 once started)
//   GET  /api/session   phase, progress, pending query coordinates
//   GET  /api/frame     pending frame: PNG (base64), queried pixels, palette;
//                       409 unless labels are awaited
//   POST /api/labels    [{row, col, class_id}, ...] or {"frame_id", "labels"};
//                       must cover the pending pixels exactly. 409 when no
//                       frame is pending or frame_id is stale, 422 on a
//                       coordinate or class mismatch
//   GET  /api/metrics   running summary
//   GET  /api/events    server-sent events, one per state change
//
// Session mutations are executed by a single worker thread that consumes a
// command queue; HTTP handlers only enqueue commands or read snapshots.
class AnnotationService {
 public:
  AnnotationService(ExperimentConfig cfg, SegNet source, std::uint64_t seed);
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  // Binds host:port (0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int listen(const std::string& host, int port);
  // Blocks until the server stops.
  void wait();
  void stop();

  Phase phase() const;
  // Parameters of the adapted network; valid once phase() is kFinished.
  std::vector<double> final_params() const;
  nlohmann::json final_summary() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ataseg
