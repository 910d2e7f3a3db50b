#include "ataseg/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include "ataseg/error.hpp"
#include "ataseg/io.hpp"
#include "ataseg/summary.hpp"

namespace ataseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string num_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string order_label(const std::vector<int>& order) {
  std::string s;
  for (int i : order) s += std::to_string(i);
  return s;
}

std::string annotator_label(const AdapterSpec& a, const AnnotatorSpec& n) {
  if (is_no_label(a.kind)) return "none";
  if (is_fully(a.kind)) return "full";
  return to_string(n.kind);
}

double final_domain_miou(const std::vector<FrameRecord>& records, int domains, int classes) {
  if (records.empty()) return 0.0;
  const auto per = domain_confusion(records, domains, classes);
  return miou(per[records.back().domain_id]).mean;
}

}  // namespace

SegNet build_source(const SourceConfig& source, int num_classes, int height, int width,
                    PretrainReport* report) {
  source.validate();
  if (!source.checkpoint.empty()) {
    auto ck = load_checkpoint(source.checkpoint);
    if (ck.net.num_classes() != num_classes || ck.net.input_channels() != 3) {
      throw ConfigError("source.checkpoint: network does not match the stream's class count");
    }
    return std::move(ck.net);
  }
  SegNet net = SegNet::make_default(3, num_classes, source.init_seed, source.hidden);
  const auto data = make_dataset(source.scenes, num_classes, height, width, source.data_seed);
  auto rep = pretrain(net, data, source.epochs, source.lr, source.shuffle_seed);
  if (report) *report = std::move(rep);
  return net;
}

SegNet cached_source(const SourceConfig& source, int num_classes, int height, int width,
                     const fs::path& cache_dir) {
  if (!source.checkpoint.empty()) return build_source(source, num_classes, height, width);
  ExperimentConfig probe;
  probe.source = source;
  json key = to_json(probe)["source"];
  key["classes"] = num_classes;
  key["height"] = height;
  key["width"] = width;
  char name[64];
  std::snprintf(name, sizeof name, "source_%016llx.ckpt",
                static_cast<unsigned long long>(fnv1a(key.dump())));
  const fs::path path = cache_dir / name;
  if (fs::exists(path)) {
    try {
      return load_checkpoint(path).net;
    } catch (const FormatError&) {
      // fall through and rebuild
    }
  }
  SegNet net = build_source(source, num_classes, height, width);
  fs::create_directories(cache_dir);
  const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
  save_checkpoint(tmp, net);
  fs::rename(tmp, path);
  return net;
}

StreamSpec stream_for_seed(const StreamSpec& base, std::uint64_t seed) {
  StreamSpec s = base;
  s.seed = seed;
  return s;
}

RunResult run_experiment(const ExperimentConfig& cfg, const SegNet& source, std::uint64_t seed,
                         Oracle* oracle, const FrameObserver& observer) {
  cfg.validate();
  if (source.num_classes() != cfg.stream.num_classes) {
    throw ConfigError("stream.num_classes: does not match the source network");
  }
  const StreamSpec spec = stream_for_seed(cfg.stream, seed);
  const auto stream = build_stream(spec);

  SimulatedOracle truth;
  Oracle& answerer = oracle ? *oracle : truth;
  Session session(source, cfg.optimizer, seed);
  AnnotatorSpec annotator = cfg.annotator;
  annotator.seed = seed;

  RunResult out;
  out.seed = seed;
  out.records = run_stream(session, stream, cfg.adapter, annotator, answerer, observer);

  RunLabel label;
  label.adapter = to_string(cfg.adapter.kind);
  label.annotator = annotator_label(cfg.adapter, cfg.annotator);
  label.budget = cfg.adapter.budget;
  label.seed = seed;
  label.lr = cfg.optimizer.lr;
  json s = summarize(out.records, spec, label);
  s["consistency"] = to_string(cfg.adapter.cst_kind);
  s["imbalance"] = to_string(cfg.annotator.imbalance);
  s["omega"] = cfg.annotator.imbalance_omega;
  s["suppression_k"] =
      cfg.annotator.suppression_k ? json(*cfg.annotator.suppression_k) : json(nullptr);
  json order = json::array();
  for (const auto& seg : spec.segments) order.push_back(to_string(seg.corruption.kind));
  s["domain_order"] = order;

  if (cfg.evaluate_source) {
    out.source_records = evaluate_frozen(source, stream);
    const json src = summarize(out.source_records, spec, RunLabel{"frozen", "none", 0, seed, 0.0});
    const int domains = spec.num_domains();
    const double adapted_last = final_domain_miou(out.records, domains, spec.num_classes);
    const double source_last = final_domain_miou(out.source_records, domains, spec.num_classes);
    json per = json::array();
    for (const auto& d : src.value("per_domain", json::array())) per.push_back(d["miou"]);
    s["source_frozen"] = {{"miou_cumulative", src.value("miou_cumulative", 0.0)},
                          {"miou_domain_avg", src.value("miou_domain_avg", 0.0)},
                          {"per_domain", per},
                          {"final_domain_miou", source_last}};
    s["final_domain_miou"] = adapted_last;
    s["final_domain_gap"] = source_last - adapted_last;
    s["error_accumulation"] = !out.records.empty() && adapted_last < source_last;
  }
  out.summary = std::move(s);
  out.net = std::move(session.net);
  out.adam = std::move(session.adam);
  return out;
}

const std::vector<std::string>& run_artifact_names() {
  static const std::vector<std::string> names = {"config.json", "frames.csv", "summary.json",
                                                 "checkpoint.bin"};
  return names;
}

void write_run_artifacts(const fs::path& dir, const ExperimentConfig& cfg, const RunResult& run) {
  fs::create_directories(dir);
  json c = to_json(cfg);
  c["seeds"] = json::array({run.seed});
  write_text(dir / "config.json", c.dump(2) + "\n");
  write_frames_csv(dir / "frames.csv", run.records);
  write_text(dir / "summary.json", run.summary.dump(2) + "\n");
  save_checkpoint(dir / "checkpoint.bin", run.net, &run.adam);
}

std::vector<SweepCell> expand_sweep(const ExperimentConfig& base) {
  const auto& g = base.sweep;
  auto or_base = [](const std::vector<std::string>& axis, std::string fallback) {
    return axis.empty() ? std::vector<std::string>{fallback} : axis;
  };
  const auto adapters = or_base(g.adapters, to_string(base.adapter.kind));
  const auto annotators = or_base(g.annotators, to_string(base.annotator.kind));
  const auto consistency = or_base(g.consistency, to_string(base.adapter.cst_kind));
  const std::vector<int> budgets = g.budgets.empty() ? std::vector<int>{base.adapter.budget}
                                                     : g.budgets;
  std::vector<std::optional<double>> omegas = {std::nullopt};
  if (!g.omegas.empty()) omegas.assign(g.omegas.begin(), g.omegas.end());
  std::vector<std::optional<int>> ks = {std::nullopt};
  if (!g.suppression_k.empty()) ks.assign(g.suppression_k.begin(), g.suppression_k.end());
  std::vector<std::vector<int>> orders = {{}};
  if (!g.domain_orders.empty()) orders = g.domain_orders;

  std::vector<SweepCell> cells;
  std::set<std::string> seen;
  for (const auto& a : adapters) {
    const AdapterKind kind = adapter_from_string(a);
    for (const auto& n : annotators) {
      for (int b : budgets) {
        for (const auto& w : omegas) {
          for (const auto& k : ks) {
            for (const auto& cs : consistency) {
              for (const auto& order : orders) {
                SweepCell cell;
                cell.config = base;
                cell.config.sweep = SweepGrid{};
                auto& c = cell.config;
                c.adapter.kind = kind;
                c.adapter.cst_kind = consistency_from_string(cs);
                std::string name = a;
                if (is_no_label(kind)) {
                  c.adapter.budget = 0;
                } else if (!is_fully(kind)) {
                  c.annotator.kind = annotator_from_string(n);
                  c.adapter.budget = b;
                  name += "-" + n + "-b" + std::to_string(b);
                  if (w) {
                    c.annotator.imbalance = ImbalanceMode::kBlend;
                    c.annotator.imbalance_omega = *w;
                    name += "-w" + num_label(*w);
                  }
                  if (k) {
                    c.annotator.suppression_k = scaled_suppression_k(*k, c.stream.width);
                    name += "-k" + std::to_string(*k);
                  }
                }
                if (uses_flip_view(kind) && !g.consistency.empty()) name += "-" + cs;
                if (!order.empty()) {
                  c.stream = reorder_segments(base.stream, order);
                  cell.domain_order = order;
                  name += "-o" + order_label(order);
                }
                if (!seen.insert(name).second) continue;
                cell.name = name;
                c.validate();
                cells.push_back(std::move(cell));
              }
            }
          }
        }
      }
    }
  }
  return cells;
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "# format_version: " << kFormatVersion << "\n";
  os << "cell,adapter,annotator,budget,omega,suppression_k,consistency,domain_order,seed,"
        "miou_cumulative,miou_domain_avg,source_miou_cumulative,imbalance_degree,"
        "spatial_diversity,labels_total,frames_skipped\n";
  auto num = [](const json& v) {
    if (v.is_null()) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return std::string(buf);
  };
  for (const auto& r : rows) {
    const json& s = r.summary;
    std::string order;
    for (const auto& d : s.value("domain_order", json::array())) {
      if (!order.empty()) order += ";";
      order += d.get<std::string>();
    }
    const json src = s.value("source_frozen", json::object());
    os << r.cell << ',' << s.value("adapter", "") << ',' << s.value("annotator", "") << ','
       << s.value("budget", 0) << ',' << num(s.value("omega", json(0.0))) << ','
       << (s.value("suppression_k", json(nullptr)).is_null()
               ? std::string()
               : std::to_string(s["suppression_k"].get<int>()))
       << ',' << s.value("consistency", "") << ',' << order << ',' << r.seed << ','
       << num(s.value("miou_cumulative", json(nullptr))) << ','
       << num(s.value("miou_domain_avg", json(nullptr))) << ','
       << num(src.value("miou_cumulative", json(nullptr))) << ','
       << num(s.value("imbalance_degree", json(nullptr))) << ','
       << num(s.contains("spatial_diversity") ? s["spatial_diversity"]["stream_mean"]
                                              : json(nullptr))
       << ',' << s.value("labels_total", 0) << ',' << s.value("frames_skipped_oracle", 0)
       << '\n';
  }
  write_text(path, os.str());
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const SegNet& source,
                                const fs::path& output_dir) {
  base.validate();
  const auto cells = expand_sweep(base);
  std::vector<SweepRow> rows;
  for (const auto& cell : cells) {
    for (auto seed : base.seeds) {
      auto run = run_experiment(cell.config, source, seed);
      write_run_artifacts(output_dir / cell.name / ("seed_" + std::to_string(seed)), cell.config,
                          run);
      rows.push_back({cell.name, seed, run.summary});
    }
  }
  write_sweep_csv(output_dir / "sweep.csv", rows);
  return rows;
}

ForgettingResult run_forgetting(const ExperimentConfig& cfg, const SegNet& source,
                                std::uint64_t seed) {
  cfg.validate();
  const StreamSpec spec = stream_for_seed(cfg.stream, seed);
  const auto stream = build_stream(spec);
  const int domains = spec.num_domains();
  std::vector<std::vector<StreamFrame>> per_domain;
  for (int d = 0; d < domains; ++d) per_domain.push_back(domain_frames(stream, d));

  std::vector<SegNet> snapshots;
  FrameObserver snap = [&](const FrameRecord& r, const Session& s) {
    const auto next = static_cast<std::size_t>(r.frame_id) + 1;
    if (next == stream.size() || stream[next].domain_id != r.domain_id) {
      snapshots.push_back(s.net);
    }
  };
  ExperimentConfig c = cfg;
  c.evaluate_source = false;
  auto run = run_experiment(c, source, seed, nullptr, snap);

  const bool flip = uses_flip_view(cfg.adapter.kind);
  ForgettingResult out;
  for (const auto& seg : spec.segments) out.domains.push_back(to_string(seg.corruption.kind));
  out.matrix = forgetting_eval(snapshots, per_domain, flip);
  out.source = forgetting_eval({source}, per_domain, flip).front();
  for (const auto& d : run.summary["per_domain"]) out.online.push_back(d["miou"].get<double>());
  return out;
}

void write_forgetting_csv(const fs::path& path, const ForgettingResult& r) {
  std::ostringstream os;
  os << "# format_version: " << kFormatVersion << "\n";
  os << "model";
  for (const auto& d : r.domains) os << ',' << d;
  os << '\n';
  auto row = [&](const std::string& name, const std::vector<double>& v) {
    os << name;
    char buf[32];
    for (double x : v) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      os << ',' << buf;
    }
    os << '\n';
  };
  row("source", r.source);
  for (std::size_t i = 0; i < r.matrix.size(); ++i) row("after_" + r.domains[i], r.matrix[i]);
  row("online", r.online);
  write_text(path, os.str());
}

void export_sweep_tables(const fs::path& sweep_csv, const fs::path& out_dir) {
  std::ifstream in(sweep_csv);
  if (!in) throw FormatError("cannot open " + sweep_csv.string());
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (line.back() == ',') fields.emplace_back();
    if (header.empty()) {
      header = fields;
      continue;
    }
    if (fields.size() != header.size()) {
      throw FormatError(sweep_csv.string() + ": row has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(header.size()));
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = fields[i];
    rows.push_back(std::move(row));
  }
  if (header.empty()) throw FormatError(sweep_csv.string() + ": missing header");
  for (const char* col : {"adapter", "annotator", "budget", "seed", "miou_cumulative",
                          "imbalance_degree", "spatial_diversity", "cell"}) {
    if (std::find(header.begin(), header.end(), col) == header.end()) {
      throw FormatError(sweep_csv.string() + ": missing column " + col);
    }
  }
  fs::create_directories(out_dir);

  std::map<std::tuple<std::string, std::string, int>, std::vector<double>> curve;
  for (const auto& r : rows) {
    curve[{r.at("adapter"), r.at("annotator"), std::stoi(r.at("budget"))}].push_back(
        std::stod(r.at("miou_cumulative")));
  }
  std::ostringstream bc;
  bc << "# format_version: " << kFormatVersion << "\n";
  bc << "adapter,annotator,budget,median_miou,runs\n";
  for (auto& [key, vals] : curve) {
    std::sort(vals.begin(), vals.end());
    const std::size_t n = vals.size();
    const double med = n % 2 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", med);
    bc << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ',' << buf
       << ',' << n << '\n';
  }
  write_text(out_dir / "budget_curve.csv", bc.str());

  std::ostringstream sc;
  sc << "# format_version: " << kFormatVersion << "\n";
  sc << "cell,seed,imbalance_degree,spatial_diversity,miou_cumulative\n";
  for (const auto& r : rows) {
    if (r.at("imbalance_degree").empty()) continue;
    sc << r.at("cell") << ',' << r.at("seed") << ',' << r.at("imbalance_degree") << ','
       << r.at("spatial_diversity") << ',' << r.at("miou_cumulative") << '\n';
  }
  write_text(out_dir / "imbalance_diversity.csv", sc.str());
}

}  // namespace ataseg
