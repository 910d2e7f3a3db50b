#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ataseg/scene.hpp"

namespace ataseg {

enum class Protocol { kFtta, kCtta };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& name);

struct StreamSegment {
  CorruptionSpec corruption;
  int frames = 0;
  bool operator==(const StreamSegment&) const = default;
};

// Test stream description. FTTA has exactly one segment; CTTA at least two.
struct StreamSpec {
  Protocol protocol = Protocol::kCtta;
  std::vector<StreamSegment> segments;
  int height = 48;
  int width = 48;
  int num_classes = 5;
  std::uint64_t seed = 0;

  void validate() const;
  int total_frames() const;
  int num_domains() const { return static_cast<int>(segments.size()); }
};

struct StreamFrame {
  std::int64_t frame_id = 0;
  int domain_id = 0;
  Scene scene;  // image already corrupted; labels untouched
};

// Fresh scene per frame, corrupted by its segment. Deterministic in spec.
std::vector<StreamFrame> build_stream(const StreamSpec& spec);

// Frames of one domain, in stream order.
std::vector<StreamFrame> domain_frames(const std::vector<StreamFrame>& stream,
                                       int domain_id);

// 48x48, C=5, severity 5, five corruption domains of frames_per_domain each.
StreamSpec desk_ctta_spec(std::uint64_t seed, int frames_per_domain = 200);
StreamSpec desk_ftta_spec(CorruptionKind kind, std::uint64_t seed,
                          int frames = 200);

// Same stream with its segments reordered by `order` (a permutation of
// segment indices).
StreamSpec reorder_segments(const StreamSpec& spec, const std::vector<int>& order);

}  // namespace ataseg
