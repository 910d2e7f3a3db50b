#include "ataseg/stream.hpp"

#include <algorithm>

#include "ataseg/error.hpp"
#include "ataseg/rng.hpp"

namespace ataseg {

std::string to_string(Protocol p) { return p == Protocol::kFtta ? "ftta" : "ctta"; }

Protocol protocol_from_string(const std::string& name) {
  if (name == "ftta") return Protocol::kFtta;
  if (name == "ctta") return Protocol::kCtta;
  throw ConfigError("unknown protocol '" + name + "' (ftta|ctta)");
}

void StreamSpec::validate() const {
  if (protocol == Protocol::kFtta && segments.size() != 1) {
    throw ConfigError("FTTA stream must have exactly one segment");
  }
  if (protocol == Protocol::kCtta && segments.size() < 2) {
    throw ConfigError("CTTA stream must have at least two segments");
  }
  if (num_classes < 3) throw ConfigError("stream.num_classes must be >= 3");
  if (height < 16 || width < 16) throw ConfigError("stream resolution must be >= 16");
  for (const auto& s : segments) {
    s.corruption.validate();
    if (s.frames <= 0) throw ConfigError("segment frame count must be positive");
  }
}

int StreamSpec::total_frames() const {
  int n = 0;
  for (const auto& s : segments) n += s.frames;
  return n;
}

std::vector<StreamFrame> build_stream(const StreamSpec& spec) {
  spec.validate();
  std::vector<StreamFrame> frames;
  frames.reserve(spec.total_frames());
  const std::uint64_t root = mix_seed(spec.seed, seed_tag::kStream);
  std::int64_t t = 0;
  for (int d = 0; d < spec.num_domains(); ++d) {
    const auto& seg = spec.segments[d];
    for (int i = 0; i < seg.frames; ++i, ++t) {
      StreamFrame f;
      f.frame_id = t;
      f.domain_id = d;
      const std::uint64_t scene_seed = mix_seed(root, static_cast<std::uint64_t>(t));
      f.scene = gen_scene(spec.num_classes, spec.height, spec.width, scene_seed);
      CorruptionSpec cs = seg.corruption;
      cs.seed = mix_seed(scene_seed, seg.corruption.seed);
      f.scene.image = corrupt(f.scene.image, cs);
      frames.push_back(std::move(f));
    }
  }
  return frames;
}

std::vector<StreamFrame> domain_frames(const std::vector<StreamFrame>& stream,
                                       int domain_id) {
  std::vector<StreamFrame> out;
  for (const auto& f : stream) {
    if (f.domain_id == domain_id) out.push_back(f);
  }
  return out;
}

StreamSpec desk_ctta_spec(std::uint64_t seed, int frames_per_domain) {
  StreamSpec spec;
  spec.protocol = Protocol::kCtta;
  spec.seed = seed;
  for (auto kind : all_corruptions()) {
    spec.segments.push_back({{kind, 5, 0}, frames_per_domain});
  }
  return spec;
}

StreamSpec desk_ftta_spec(CorruptionKind kind, std::uint64_t seed, int frames) {
  StreamSpec spec;
  spec.protocol = Protocol::kFtta;
  spec.seed = seed;
  spec.segments.push_back({{kind, 5, 0}, frames});
  return spec;
}

StreamSpec reorder_segments(const StreamSpec& spec, const std::vector<int>& order) {
  std::vector<int> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  bool ok = sorted.size() == spec.segments.size();
  for (int i = 0; ok && i < static_cast<int>(sorted.size()); ++i) ok = sorted[i] == i;
  if (!ok) {
    throw ConfigError("segment order must be a permutation of 0.." +
                      std::to_string(spec.segments.size() - 1));
  }
  StreamSpec out = spec;
  for (std::size_t i = 0; i < order.size(); ++i) out.segments[i] = spec.segments[order[i]];
  return out;
}

}  // namespace ataseg
