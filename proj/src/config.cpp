#include "ataseg/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "ataseg/error.hpp"
#include "ataseg/io.hpp"

namespace ataseg {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, std::set<std::string> allowed) {
  if (!obj.is_object()) field_error(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) field_error(path.empty() ? key : path + "." + key, "unknown field");
  }
}

template <typename T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const std::string full = path.empty() ? key : path + "." + key;
  const json& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) field_error(full, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) field_error(full, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned()) field_error(full, "expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) field_error(full, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) field_error(full, "expected a string");
    }
    out = v.get<T>();
  } catch (const json::exception& e) {
    field_error(full, e.what());
  }
}

template <typename E, typename F>
void read_enum(const json& obj, const std::string& path, const char* key, E& out, F parse) {
  std::string name;
  const bool present = obj.contains(key);
  read(obj, path, key, name);
  if (!present) return;
  try {
    out = parse(name);
  } catch (const ConfigError&) {
    field_error(path + "." + key, "unknown value '" + name + "'");
  }
}

// Runs a validator and prefixes its message with the section name.
template <typename F>
void validated(const std::string& section, F fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(section, 0) == 0) throw;
    field_error(section, msg);
  }
}

json adapter_json(const AdapterSpec& a) {
  return {{"kind", to_string(a.kind)},
          {"lambda_ent", a.lambda_ent},
          {"lambda_cst", a.lambda_cst},
          {"consistency", to_string(a.cst_kind)},
          {"budget", a.budget},
          {"detach_cst_target", a.detach_cst_target}};
}

json annotator_json(const AnnotatorSpec& a) {
  return {{"kind", to_string(a.kind)},
          {"ripu_k", a.ripu_k},
          {"suppression_k", a.suppression_k ? json(*a.suppression_k) : json(nullptr)},
          {"imbalance", to_string(a.imbalance)},
          {"omega", a.imbalance_omega}};
}

}  // namespace

std::string to_string(OracleMode mode) {
  return mode == OracleMode::kHuman ? "human" : "simulated";
}

OracleMode oracle_mode_from_string(const std::string& name) {
  if (name == "simulated") return OracleMode::kSimulated;
  if (name == "human") return OracleMode::kHuman;
  throw ConfigError("unknown oracle mode '" + name + "'");
}

void SourceConfig::validate() const {
  if (hidden.empty()) field_error("source.hidden", "needs at least one hidden layer");
  for (int h : hidden) {
    if (h < 1) field_error("source.hidden", "layer widths must be >= 1");
  }
  if (checkpoint.empty()) {
    if (scenes < 1) field_error("source.scenes", "must be >= 1");
    if (epochs < 0) field_error("source.epochs", "must be >= 0");
    if (!(lr > 0.0) || !std::isfinite(lr)) field_error("source.lr", "must be positive");
  }
}

void ExperimentConfig::validate() const {
  validated("adapter", [&] { adapter.validate(); });
  validated("annotator", [&] { annotator.validate(); });
  validated("stream", [&] { stream.validate(); });
  if (!(optimizer.lr > 0.0) || !std::isfinite(optimizer.lr)) {
    field_error("optimizer.lr", "must be positive");
  }
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) {
    field_error("optimizer.beta1", "must be in [0,1)");
  }
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    field_error("optimizer.beta2", "must be in [0,1)");
  }
  if (!(optimizer.eps > 0.0)) field_error("optimizer.eps", "must be positive");
  if (seeds.empty()) field_error("seeds", "needs at least one seed");
  if (output_dir.empty()) field_error("output_dir", "must not be empty");
  source.validate();
  if (!(oracle.timeout_s > 0.0)) field_error("oracle.timeout_s", "must be positive");
  for (int b : sweep.budgets) {
    if (b < 0) field_error("sweep.budgets", "must be >= 0");
  }
  for (double w : sweep.omegas) {
    if (!(w >= 0.0 && w <= 1.0)) field_error("sweep.omegas", "must lie in [0,1]");
  }
  for (int k : sweep.suppression_k) {
    if (k < 1) field_error("sweep.suppression_k", "must be >= 1");
  }
  for (const auto& a : sweep.adapters) {
    validated("sweep.adapters", [&] { adapter_from_string(a); });
  }
  for (const auto& a : sweep.annotators) {
    validated("sweep.annotators", [&] { annotator_from_string(a); });
  }
  for (const auto& c : sweep.consistency) {
    validated("sweep.consistency", [&] { consistency_from_string(c); });
  }
  for (const auto& order : sweep.domain_orders) {
    validated("sweep.domain_orders", [&] { reorder_segments(stream, order); });
  }
}

ExperimentConfig desk_preset() {
  ExperimentConfig cfg;
  cfg.optimizer.lr = kDeskLearningRate;
  return cfg;
}

json to_json(const StreamSpec& spec) {
  json segs = json::array();
  for (const auto& s : spec.segments) {
    segs.push_back({{"corruption", to_string(s.corruption.kind)},
                    {"severity", s.corruption.severity},
                    {"seed", s.corruption.seed},
                    {"frames", s.frames}});
  }
  return {{"protocol", to_string(spec.protocol)},
          {"height", spec.height},
          {"width", spec.width},
          {"num_classes", spec.num_classes},
          {"segments", segs}};
}

StreamSpec stream_from_json(const json& doc) {
  StreamSpec spec = desk_ctta_spec(0);
  check_keys(doc, "stream", {"protocol", "height", "width", "num_classes", "segments"});
  read_enum(doc, "stream", "protocol", spec.protocol, protocol_from_string);
  read(doc, "stream", "height", spec.height);
  read(doc, "stream", "width", spec.width);
  read(doc, "stream", "num_classes", spec.num_classes);
  if (doc.contains("segments")) {
    const json& segs = doc.at("segments");
    if (!segs.is_array()) field_error("stream.segments", "expected an array");
    spec.segments.clear();
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const std::string path = "stream.segments[" + std::to_string(i) + "]";
      check_keys(segs[i], path, {"corruption", "severity", "seed", "frames"});
      StreamSegment seg;
      read_enum(segs[i], path, "corruption", seg.corruption.kind, corruption_from_string);
      read(segs[i], path, "severity", seg.corruption.severity);
      read(segs[i], path, "seed", seg.corruption.seed);
      read(segs[i], path, "frames", seg.frames);
      spec.segments.push_back(seg);
    }
  }
  return spec;
}

json to_json(const ExperimentConfig& cfg) {
  json seeds = json::array();
  for (auto s : cfg.seeds) seeds.push_back(s);
  json orders = json::array();
  for (const auto& o : cfg.sweep.domain_orders) orders.push_back(o);
  return {
      {"format_version", kFormatVersion},
      {"adapter", adapter_json(cfg.adapter)},
      {"annotator", annotator_json(cfg.annotator)},
      {"stream", to_json(cfg.stream)},
      {"optimizer",
       {{"lr", cfg.optimizer.lr},
        {"beta1", cfg.optimizer.beta1},
        {"beta2", cfg.optimizer.beta2},
        {"eps", cfg.optimizer.eps}}},
      {"seeds", seeds},
      {"output_dir", cfg.output_dir},
      {"source",
       {{"checkpoint", cfg.source.checkpoint},
        {"hidden", cfg.source.hidden},
        {"scenes", cfg.source.scenes},
        {"data_seed", cfg.source.data_seed},
        {"init_seed", cfg.source.init_seed},
        {"epochs", cfg.source.epochs},
        {"lr", cfg.source.lr},
        {"shuffle_seed", cfg.source.shuffle_seed}}},
      {"oracle", {{"mode", to_string(cfg.oracle.mode)}, {"timeout_s", cfg.oracle.timeout_s}}},
      {"evaluate_source", cfg.evaluate_source},
      {"multi_session", cfg.multi_session},
      {"sweep",
       {{"adapters", cfg.sweep.adapters},
        {"annotators", cfg.sweep.annotators},
        {"budgets", cfg.sweep.budgets},
        {"omegas", cfg.sweep.omegas},
        {"suppression_k", cfg.sweep.suppression_k},
        {"consistency", cfg.sweep.consistency},
        {"domain_orders", orders}}},
  };
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  check_keys(doc, "",
             {"format_version", "adapter", "annotator", "stream", "optimizer", "seeds",
              "output_dir", "source", "oracle", "evaluate_source", "multi_session", "sweep"});
  if (doc.contains("format_version")) {
    int version = 0;
    read(doc, "", "format_version", version);
    if (version != kFormatVersion) {
      field_error("format_version", "unsupported version " + std::to_string(version));
    }
  }
  if (doc.contains("adapter")) {
    const json& a = doc.at("adapter");
    check_keys(a, "adapter",
               {"kind", "lambda_ent", "lambda_cst", "consistency", "budget", "detach_cst_target"});
    read_enum(a, "adapter", "kind", cfg.adapter.kind, adapter_from_string);
    read(a, "adapter", "lambda_ent", cfg.adapter.lambda_ent);
    read(a, "adapter", "lambda_cst", cfg.adapter.lambda_cst);
    read_enum(a, "adapter", "consistency", cfg.adapter.cst_kind, consistency_from_string);
    read(a, "adapter", "budget", cfg.adapter.budget);
    read(a, "adapter", "detach_cst_target", cfg.adapter.detach_cst_target);
  }
  if (doc.contains("annotator")) {
    const json& a = doc.at("annotator");
    check_keys(a, "annotator", {"kind", "ripu_k", "suppression_k", "imbalance", "omega"});
    read_enum(a, "annotator", "kind", cfg.annotator.kind, annotator_from_string);
    read(a, "annotator", "ripu_k", cfg.annotator.ripu_k);
    if (a.contains("suppression_k") && !a.at("suppression_k").is_null()) {
      int k = 0;
      read(a, "annotator", "suppression_k", k);
      cfg.annotator.suppression_k = k;
    }
    read_enum(a, "annotator", "imbalance", cfg.annotator.imbalance, imbalance_from_string);
    read(a, "annotator", "omega", cfg.annotator.imbalance_omega);
  }
  if (doc.contains("stream")) cfg.stream = stream_from_json(doc.at("stream"));
  if (doc.contains("optimizer")) {
    const json& o = doc.at("optimizer");
    check_keys(o, "optimizer", {"lr", "beta1", "beta2", "eps"});
    read(o, "optimizer", "lr", cfg.optimizer.lr);
    read(o, "optimizer", "beta1", cfg.optimizer.beta1);
    read(o, "optimizer", "beta2", cfg.optimizer.beta2);
    read(o, "optimizer", "eps", cfg.optimizer.eps);
  }
  if (doc.contains("seeds")) {
    const json& s = doc.at("seeds");
    if (!s.is_array()) field_error("seeds", "expected an array of non-negative integers");
    cfg.seeds.clear();
    for (const auto& v : s) {
      if (!v.is_number_unsigned()) field_error("seeds", "expected non-negative integers");
      cfg.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  read(doc, "", "output_dir", cfg.output_dir);
  if (doc.contains("source")) {
    const json& s = doc.at("source");
    check_keys(s, "source",
               {"checkpoint", "hidden", "scenes", "data_seed", "init_seed", "epochs", "lr",
                "shuffle_seed"});
    read(s, "source", "checkpoint", cfg.source.checkpoint);
    read(s, "source", "hidden", cfg.source.hidden);
    read(s, "source", "scenes", cfg.source.scenes);
    read(s, "source", "data_seed", cfg.source.data_seed);
    read(s, "source", "init_seed", cfg.source.init_seed);
    read(s, "source", "epochs", cfg.source.epochs);
    read(s, "source", "lr", cfg.source.lr);
    read(s, "source", "shuffle_seed", cfg.source.shuffle_seed);
  }
  if (doc.contains("oracle")) {
    const json& o = doc.at("oracle");
    check_keys(o, "oracle", {"mode", "timeout_s"});
    read_enum(o, "oracle", "mode", cfg.oracle.mode, oracle_mode_from_string);
    read(o, "oracle", "timeout_s", cfg.oracle.timeout_s);
  }
  read(doc, "", "evaluate_source", cfg.evaluate_source);
  read(doc, "", "multi_session", cfg.multi_session);
  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    check_keys(s, "sweep",
               {"adapters", "annotators", "budgets", "omegas", "suppression_k", "consistency",
                "domain_orders"});
    read(s, "sweep", "adapters", cfg.sweep.adapters);
    read(s, "sweep", "annotators", cfg.sweep.annotators);
    read(s, "sweep", "budgets", cfg.sweep.budgets);
    read(s, "sweep", "omegas", cfg.sweep.omegas);
    read(s, "sweep", "suppression_k", cfg.sweep.suppression_k);
    read(s, "sweep", "consistency", cfg.sweep.consistency);
    read(s, "sweep", "domain_orders", cfg.sweep.domain_orders);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace ataseg
