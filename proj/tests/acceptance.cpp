// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ataseg/annotator.hpp"
#include "ataseg/experiment.hpp"
#include "ataseg/io.hpp"
#include "ataseg/losses.hpp"
#include "ataseg/metrics.hpp"
#include "ataseg/summary.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "test_env.hpp"

using namespace ataseg;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

const std::vector<std::uint64_t> kSeeds = {0, 1, 2};

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("[%s] %s %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id.c_str(), name.c_str(),
              o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ExperimentConfig variant(AdapterKind kind, AnnotatorKind ann, int budget) {
  auto cfg = desk_preset();
  cfg.adapter.kind = kind;
  cfg.adapter.budget = budget;
  cfg.annotator.kind = ann;
  return cfg;
}

// Cumulative and final-domain results of one configuration over kSeeds.
struct Cell {
  std::vector<double> cumulative;
  std::vector<double> final_domain;
  std::vector<double> source_cumulative;
  std::vector<double> source_final_domain;
  double med() const { return median(cumulative); }
};

std::map<std::string, Cell> cache;

const Cell& cell(const std::string& key, const ExperimentConfig& cfg) {
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Cell c;
  for (auto s : kSeeds) {
    auto run = run_experiment(cfg, test_env::source_net(), s);
    c.cumulative.push_back(run.summary["miou_cumulative"].get<double>());
    c.final_domain.push_back(run.summary["final_domain_miou"].get<double>());
    c.source_cumulative.push_back(run.summary["source_frozen"]["miou_cumulative"].get<double>());
    c.source_final_domain.push_back(run.summary["source_frozen"]["final_domain_miou"].get<double>());
    std::printf("    %-14s seed %llu cumulative %.4f\n", key.c_str(),
                static_cast<unsigned long long>(s), c.cumulative.back());
    std::fflush(stdout);
  }
  return cache.emplace(key, std::move(c)).first->second;
}

const Cell& b1(AnnotatorKind a, int b) {
  return cell("b1_" + to_string(a) + std::to_string(b), variant(AdapterKind::kB1, a, b));
}
const Cell& b0(AnnotatorKind a, int b) {
  return cell("b0_" + to_string(a) + std::to_string(b), variant(AdapterKind::kB0, a, b));
}

Outcome gradient_fidelity() {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto c = gradcheck::random_case(1000 + seed);
    const auto params = gradcheck::params_of(c.net);
    if (params.size() > 5000) return {false, "case exceeds 5k parameters"};
    auto num0 = oracle::numeric_gradient([&](const auto& p) { return gradcheck::oracle_b0(c, p); },
                                         params);
    worst = std::max(worst, oracle::max_relative_error(gradcheck::analytic_b0(c), num0));
    for (auto kind : {ConsistencyKind::kSce, ConsistencyKind::kL1, ConsistencyKind::kMse}) {
      auto num = oracle::numeric_gradient(
          [&](const auto& p) { return gradcheck::oracle_b1(c, p, kind); }, params);
      worst = std::max(worst, oracle::max_relative_error(gradcheck::analytic_b1(c, kind), num));
    }
  }
  return {worst < 1e-4, fmt("max relative error %.3g over 20 cases", worst)};
}

Outcome ripu_equivalence() {
  double worst = 0;
  for (std::uint64_t m = 0; m < 100; ++m) {
    std::mt19937_64 rng(5000 + m);
    Tensor t = oracle::random_probs(32, 32, 5, rng);
    const PredictionMap p(t);
    const auto img = oracle::to_image(t);
    for (int k : {0, 1, 2, 5}) {
      auto fast = score_ripu(p, k);
      auto ref = oracle::ripu(img, k);
      for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(fast.values[i] - ref[i]));
    }
  }
  return {worst <= 1e-12, fmt("max abs difference %.3g", worst)};
}

Outcome selection_correctness() {
  int mismatches = 0, violations = 0;
  for (std::uint64_t m = 0; m < 100; ++m) {
    std::mt19937_64 rng(9000 + m);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ActiveScoreMap a(16, 16);
    for (auto& v : a.values) v = u(rng);
    for (int b : {1, 4, 16}) {
      for (std::optional<int> k : {std::optional<int>{}, std::optional<int>{3}}) {
        auto got = select(a, b, k);
        if (got != oracle::greedy_select(a.values, 16, 16, b, k.value_or(0))) ++mismatches;
        std::set<std::pair<int, int>> distinct;
        for (const auto& p : got) distinct.insert({p.row, p.col});
        if (static_cast<int>(got.size()) != b || distinct.size() != got.size()) ++violations;
        for (double c : {0.5, 3.0}) {
          ActiveScoreMap scaled = a;
          for (auto& v : scaled.values) v *= c;
          if (select(scaled, b, k) != got) ++mismatches;
        }
      }
    }
  }
  return {mismatches == 0 && violations == 0,
          std::to_string(mismatches) + " mismatches, " + std::to_string(violations) +
              " budget/distinctness violations"};
}

Outcome hand_values() {
  auto pm = [](std::vector<std::vector<double>> px) {
    const std::size_t c = px.front().size();
    std::vector<double> flat;
    for (auto& p : px) flat.insert(flat.end(), p.begin(), p.end());
    return PredictionMap(Tensor({1, px.size(), c}, std::move(flat)));
  };
  auto labels = [](std::vector<PixelLabel> e) {
    ActiveLabelSet s;
    s.entries = std::move(e);
    return s;
  };
  std::vector<std::pair<double, double>> checks = {
      {ce_sparse(pm({{0.5, 0.5}}), labels({{0, 0, 1}})), 0.6931},
      {ce_sparse(pm({{0.2, 0.8}, {0.5, 0.5}, {0.9, 0.1}}), labels({{0, 0, 0}, {0, 1, 0}, {0, 2, 0}})),
       0.8027},
      {ent_full(PredictionMap(Tensor::image(3, 3, 4, 0.25))), 1.3863},
      {ent_full(pm({{0.5, 0.5}, {1.0, 0.0}})), 0.3466},
      {cst(pm({{0.5, 0.5}}), pm({{0.5, 0.5}}), ConsistencyKind::kSce), 0.6931},
      {cst(pm({{0.8, 0.2}}), pm({{0.6, 0.4}}), ConsistencyKind::kSce), 0.5919},
      {cst(pm({{0.8, 0.2}}), pm({{0.8, 0.2}}), ConsistencyKind::kL1), 0.0},
      {score_bvsb(pm({{0.7, 0.2, 0.1}})).at(0, 0), -0.5},
      {score_bvsb(pm({{0.5, 0.5}})).at(0, 0), 0.0},
      {score_ent(pm({{0.25, 0.25, 0.25, 0.25}})).at(0, 0), 1.3863},
      {score_ent(pm({{0.7, 0.2, 0.1}})).at(0, 0), 0.8018},
      {mean_pairwise_distance(std::vector<Pixel>{{0, 0}, {3, 4}}), 5.0},
      {mean_pairwise_distance(std::vector<Pixel>{{0, 0}, {0, 2}, {0, 4}}), 2.6667},
  };
  ClassFrequencyTracker single(4);
  for (int i = 0; i < 5; ++i) single.add(2);
  checks.push_back({*imbalance_degree(single), 0.8660});
  ClassFrequencyTracker two(4);
  two.add(0);
  two.add(1);
  checks.push_back({*imbalance_degree(two), 0.5});
  ConfusionMatrix cm(2);
  cm.add(0, 0, 3);
  cm.add(0, 1, 1);
  cm.add(1, 0, 1);
  cm.add(1, 1, 3);
  checks.push_back({miou(cm).mean, 0.6});
  int bad = 0;
  double worst = 0;
  for (auto [got, want] : checks) {
    worst = std::max(worst, std::abs(got - want));
    if (!(std::abs(got - want) < 1e-4)) ++bad;
  }
  return {bad == 0, std::to_string(checks.size()) + " values, max deviation " + fmt("%.2g", worst)};
}

Outcome error_accumulation() {
  const auto& c = cell("b0_nolabel", variant(AdapterKind::kB0NoLabel, AnnotatorKind::kBvsb, 0));
  std::vector<double> gaps;
  bool all_below = true;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    gaps.push_back(c.source_final_domain[i] - c.final_domain[i]);
    all_below = all_below && c.final_domain[i] < c.source_final_domain[i];
  }
  const double gap = median(gaps);
  return {all_below && gap > 0.05,
          fmt("final-domain mIoU %.4f", median(c.final_domain)) +
              fmt(" vs frozen %.4f", median(c.source_final_domain)) + fmt(", median gap %.4f", gap)};
}

Outcome gap_closing() {
  const auto& fully = cell("fully_b1", variant(AdapterKind::kFullyB1, AnnotatorKind::kBvsb, 16));
  const auto& b16 = b1(AnnotatorKind::kBvsb, 16);
  const auto& bb1 = b1(AnnotatorKind::kBvsb, 1);
  const double src = median(fully.source_cumulative);
  const double f = fully.med(), a = b16.med(), one = bb1.med();
  const double ratio = (f - a) / (f - src);
  return {ratio <= 0.25 && one > src,
          fmt("fully %.4f", f) + fmt(", b16 %.4f", a) + fmt(", b1 %.4f", one) +
              fmt(", source %.4f", src) + fmt(", remaining gap fraction %.3f", ratio)};
}

Outcome orderings() {
  struct Pair {
    std::string name;
    double hi, lo;
  };
  std::vector<Pair> pairs = {
      {"B0 bvsb>=ent", b0(AnnotatorKind::kBvsb, 16).med(), b0(AnnotatorKind::kEnt, 16).med()},
      {"B1 bvsb>=ent", b1(AnnotatorKind::kBvsb, 16).med(), b1(AnnotatorKind::kEnt, 16).med()},
      {"rand B1>=B0", b1(AnnotatorKind::kRand, 16).med(), b0(AnnotatorKind::kRand, 16).med()},
      {"bvsb B1>=B0", b1(AnnotatorKind::kBvsb, 16).med(), b0(AnnotatorKind::kBvsb, 16).med()},
  };
  bool ok = true;
  std::string detail;
  for (const auto& p : pairs) {
    const double d = p.hi - p.lo;
    std::string tag = d >= 0 ? "" : (d >= -0.003 ? " tie" : " VIOLATED");
    if (d < -0.003) ok = false;
    if (!detail.empty()) detail += "; ";
    detail += p.name + fmt(" %+.4f", d) + tag;
  }
  return {ok, detail};
}

Outcome budget_monotonicity() {
  const double m1 = b1(AnnotatorKind::kBvsb, 1).med();
  const double m4 = b1(AnnotatorKind::kBvsb, 4).med();
  const double m16 = b1(AnnotatorKind::kBvsb, 16).med();
  return {m16 - m4 >= 0.003 && m4 - m1 >= 0.003,
          fmt("b1 %.4f", m1) + fmt(", b4 %.4f", m4) + fmt(", b16 %.4f", m16)};
}

Outcome supervised_equivalence() {
  const auto stream = build_stream(desk_ctta_spec(0, 2));
  auto cfg = desk_preset();
  AdapterSpec fully;
  fully.kind = AdapterKind::kFullyB0;
  AdapterSpec exhaustive;
  exhaustive.kind = AdapterKind::kB0;
  exhaustive.budget = 48 * 48;
  AnnotatorSpec ann;
  SimulatedOracle truth;
  Session a(test_env::source_net(), cfg.optimizer, 0), b(test_env::source_net(), cfg.optimizer, 0);
  run_stream(a, stream, fully, ann, truth);
  run_stream(b, stream, exhaustive, ann, truth);
  const bool same = std::equal(a.net.params().begin(), a.net.params().end(), b.net.params().begin());
  const bool moved = !std::equal(a.net.params().begin(), a.net.params().end(),
                                 test_env::source_net().params().begin());
  return {same && moved, std::to_string(stream.size()) + " frames, parameters " +
                             (same ? "bit-identical" : "differ")};
}

Outcome no_forgetting() {
  const auto cfg = variant(AdapterKind::kB1, AnnotatorKind::kBvsb, 16);
  std::vector<std::vector<double>> last(5), src(5);
  for (auto s : kSeeds) {
    auto r = run_forgetting(cfg, test_env::source_net(), s);
    for (int d = 0; d < 5; ++d) {
      last[d].push_back(r.matrix.back()[d]);
      src[d].push_back(r.source[d]);
    }
  }
  int held = 0;
  std::string detail;
  for (int d = 0; d < 5; ++d) {
    const double a = median(last[d]), f = median(src[d]);
    held += a >= f;
    detail += fmt(" %.3f", a) + fmt("/%.3f", f);
  }
  return {held >= 4, std::to_string(held) + "/5 domains at or above source (adapted/source):" + detail};
}

Outcome determinism() {
  auto cfg = desk_preset();
  cfg.stream = desk_ctta_spec(0, 4);
  auto a = run_experiment(cfg, test_env::source_net(), 7);
  auto b = run_experiment(cfg, test_env::source_net(), 7);
  const bool same_summary = a.summary.dump() == b.summary.dump();
  const fs::path path = fs::temp_directory_path() / "ataseg_acceptance.ckpt";
  save_checkpoint(path, a.net, &a.adam);
  auto ck = load_checkpoint(path);
  fs::remove(path);
  const bool exact = std::equal(a.net.params().begin(), a.net.params().end(), ck.net.params().begin()) &&
                     ck.adam && *ck.adam == a.adam;
  return {same_summary && exact, std::string("summary ") + (same_summary ? "identical" : "differs") +
                                     ", checkpoint " + (exact ? "bit-exact" : "differs")};
}

}  // namespace

int main() {
  std::printf("source network: %zu parameters, learning rate %.3g, seeds 0-2\n",
              test_env::source_net().param_count(), desk_preset().optimizer.lr);
  report("P1", "gradient fidelity", gradient_fidelity);
  report("P2", "RIPU equivalence", ripu_equivalence);
  report("P3", "selection correctness", selection_correctness);
  report("P4", "hand values", hand_values);
  report("P5", "error accumulation without labels", error_accumulation);
  report("P6", "annotation closes the gap", gap_closing);
  report("P7", "orderings", orderings);
  report("P8", "budget monotonicity", budget_monotonicity);
  report("P9", "supervised counterpart equivalence", supervised_equivalence);
  report("P10", "no catastrophic forgetting", no_forgetting);
  report("P11", "determinism and persistence", determinism);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
