// ataseg command-line interface.
//
// Exit codes: 0 success, 1 usage error, 2 invalid configuration, 3 runtime
// failure.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "ataseg/config.hpp"
#include "ataseg/error.hpp"
#include "ataseg/experiment.hpp"
#include "ataseg/io.hpp"
#include "ataseg/service.hpp"
#include "ataseg/summary.hpp"

namespace fs = std::filesystem;
using namespace ataseg;

namespace {

struct CommonArgs {
  std::string config;
  std::string preset = "desk";
  std::string source;
  std::string cache_dir = ".ataseg-cache";
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::string adapter;
  std::string annotator;
  int budget = -1;
  double lr = 0.0;
  int frames_per_domain = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("-c,--config", a.config, "JSON config file (unset fields take defaults)");
  cmd->add_option("--preset", a.preset, "defaults when no config file is given: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--source", a.source, "source checkpoint (overrides source.checkpoint)");
  cmd->add_option("--cache-dir", a.cache_dir, "where pretrained source networks are cached");
  cmd->add_option("-o,--out", a.out, "output directory (overrides output_dir)");
  cmd->add_option("--seed", a.seeds, "run seed(s) (overrides seeds)")->delimiter(',');
  cmd->add_option("--adapter", a.adapter, "b0, b1, b0_nolabel, b1_nolabel, fully_b0, fully_b1");
  cmd->add_option("--annotator", a.annotator, "rand, ent, ripu, bvsb");
  cmd->add_option("--budget", a.budget, "labelled pixels per frame");
  cmd->add_option("--lr", a.lr, "adaptation learning rate");
  cmd->add_option("--frames-per-domain", a.frames_per_domain, "frames in every stream segment");
}

ExperimentConfig resolve(const CommonArgs& a) {
  ExperimentConfig cfg;
  if (!a.config.empty()) {
    cfg = load_config(a.config);
  } else if (a.preset == "desk") {
    cfg = desk_preset();
  }
  if (!a.source.empty()) cfg.source.checkpoint = a.source;
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (!a.seeds.empty()) cfg.seeds = a.seeds;
  if (!a.adapter.empty()) {
    try {
      cfg.adapter.kind = adapter_from_string(a.adapter);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("adapter.kind: ") + e.what());
    }
    if (is_no_label(cfg.adapter.kind)) cfg.adapter.budget = 0;
  }
  if (!a.annotator.empty()) {
    try {
      cfg.annotator.kind = annotator_from_string(a.annotator);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("annotator.kind: ") + e.what());
    }
  }
  if (a.budget >= 0) cfg.adapter.budget = a.budget;
  if (a.lr != 0.0) cfg.optimizer.lr = a.lr;
  if (a.frames_per_domain != 0) {
    for (auto& seg : cfg.stream.segments) seg.frames = a.frames_per_domain;
  }
  cfg.validate();
  return cfg;
}

SegNet source_for(const ExperimentConfig& cfg, const CommonArgs& a) {
  return cached_source(cfg.source, cfg.stream.num_classes, cfg.stream.height, cfg.stream.width,
                       a.cache_dir);
}

void print_summary_line(const std::string& tag, const nlohmann::json& s) {
  std::printf("%s miou_cum=%.4f miou_domain_avg=%.4f", tag.c_str(),
              s.value("miou_cumulative", 0.0), s.value("miou_domain_avg", 0.0));
  if (s.contains("source_frozen")) {
    std::printf(" source=%.4f", s["source_frozen"].value("miou_cumulative", 0.0));
  }
  if (s.value("error_accumulation", false)) std::printf(" error_accumulation");
  std::printf("\n");
}

volatile std::sig_atomic_t g_interrupted = 0;

void on_signal(int) { g_interrupted = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active test-time adaptation for segmentation on a desk-scale stream"};
  app.require_subcommand(1);

  CommonArgs common;

  auto* pre = app.add_subcommand("pretrain", "train the source network and save a checkpoint");
  add_common(pre, common);
  std::string dataset_dir;
  pre->add_option("--dataset-dir", dataset_dir, "also save the generated source dataset here");

  auto* run = app.add_subcommand("run", "adapt over the stream once per seed");
  add_common(run, common);

  auto* sweep = app.add_subcommand("sweep", "run the config's sweep grid and merge results");
  add_common(sweep, common);
  std::vector<int> sweep_budgets;
  std::vector<std::string> sweep_annotators;
  std::vector<std::string> sweep_adapters;
  std::vector<double> sweep_omegas;
  std::vector<int> sweep_ks;
  sweep->add_option("--budgets", sweep_budgets, "budget axis")->delimiter(',');
  sweep->add_option("--annotators", sweep_annotators, "annotator axis")->delimiter(',');
  sweep->add_option("--adapters", sweep_adapters, "adapter axis")->delimiter(',');
  sweep->add_option("--omegas", sweep_omegas, "blend weight axis (enables blend imbalance)")->delimiter(',');
  sweep->add_option("--suppression-k", sweep_ks, "suppression window axis at 960-pixel width")->delimiter(',');

  auto* forget = app.add_subcommand("forgetting", "per-domain re-evaluation after each domain");
  add_common(forget, common);

  auto* exp = app.add_subcommand("export", "plot-ready tables from a sweep directory");
  std::string export_in, export_out;
  exp->add_option("sweep_dir", export_in, "directory containing sweep.csv")->required();
  exp->add_option("-o,--out", export_out, "output directory (default: sweep_dir)");

  auto* serve = app.add_subcommand("serve", "host a human-oracle session over HTTP");
  add_common(serve, common);
  std::string host = "127.0.0.1";
  int port = 8080;
  double timeout = 0.0;
  bool exit_on_finish = false;
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "bind port (0 picks a free port)");
  serve->add_option("--timeout", timeout, "seconds to wait for labels per frame");
  serve->add_flag("--exit-on-finish", exit_on_finish, "stop serving once the stream ends");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*exp) {
      export_sweep_tables(fs::path(export_in) / "sweep.csv",
                          export_out.empty() ? fs::path(export_in) : fs::path(export_out));
      std::printf("wrote budget_curve.csv and imbalance_diversity.csv\n");
      return 0;
    }

    ExperimentConfig cfg = resolve(common);

    if (*pre) {
      const fs::path out = common.out.empty() ? fs::path("source.ckpt") : fs::path(common.out);
      PretrainReport report;
      cfg.source.checkpoint.clear();
      SegNet net = build_source(cfg.source, cfg.stream.num_classes, cfg.stream.height,
                                cfg.stream.width, &report);
      for (std::size_t e = 0; e < report.epoch_mean_ce.size(); ++e) {
        std::printf("epoch %zu ce=%.5f\n", e + 1, report.epoch_mean_ce[e]);
      }
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_checkpoint(out, net);
      if (!dataset_dir.empty()) {
        save_dataset(dataset_dir, make_dataset(cfg.source.scenes, cfg.stream.num_classes,
                                               cfg.stream.height, cfg.stream.width,
                                               cfg.source.data_seed));
      }
      std::printf("saved %s\n", out.string().c_str());
      return 0;
    }

    if (*run) {
      const SegNet source = source_for(cfg, common);
      for (auto seed : cfg.seeds) {
        auto result = run_experiment(cfg, source, seed);
        const fs::path dir = fs::path(cfg.output_dir) / ("seed_" + std::to_string(seed));
        write_run_artifacts(dir, cfg, result);
        print_summary_line(dir.string(), result.summary);
      }
      return 0;
    }

    if (*sweep) {
      if (!sweep_budgets.empty()) cfg.sweep.budgets = sweep_budgets;
      if (!sweep_annotators.empty()) cfg.sweep.annotators = sweep_annotators;
      if (!sweep_adapters.empty()) cfg.sweep.adapters = sweep_adapters;
      if (!sweep_omegas.empty()) cfg.sweep.omegas = sweep_omegas;
      if (!sweep_ks.empty()) cfg.sweep.suppression_k = sweep_ks;
      cfg.validate();
      const SegNet source = source_for(cfg, common);
      const auto rows = run_sweep(cfg, source, cfg.output_dir);
      for (const auto& r : rows) {
        print_summary_line(r.cell + " seed " + std::to_string(r.seed), r.summary);
      }
      std::printf("wrote %s\n", (fs::path(cfg.output_dir) / "sweep.csv").string().c_str());
      return 0;
    }

    if (*forget) {
      const SegNet source = source_for(cfg, common);
      fs::create_directories(cfg.output_dir);
      for (auto seed : cfg.seeds) {
        auto result = run_forgetting(cfg, source, seed);
        const fs::path path =
            fs::path(cfg.output_dir) / ("forgetting_seed_" + std::to_string(seed) + ".csv");
        write_forgetting_csv(path, result);
        std::printf("wrote %s\n", path.string().c_str());
      }
      return 0;
    }

    if (*serve) {
      if (timeout > 0.0) cfg.oracle.timeout_s = timeout;
      cfg.oracle.mode = OracleMode::kHuman;
      cfg.validate();
      const SegNet source = source_for(cfg, common);
      AnnotationService service(cfg, source, cfg.seeds.front());
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int bound = service.listen(host, port);
      std::printf("serving on http://%s:%d\n", host.c_str(), bound);
      std::fflush(stdout);
      while (!g_interrupted && !(exit_on_finish && service.phase() == Phase::kFinished)) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      if (service.phase() == Phase::kFinished) {
        print_summary_line("session", service.final_summary());
      }
      service.stop();
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 1;
}
