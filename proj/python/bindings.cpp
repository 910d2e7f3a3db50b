#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "ataseg/annotator.hpp"
#include "ataseg/error.hpp"
#include "ataseg/experiment.hpp"
#include "ataseg/io.hpp"
#include "ataseg/losses.hpp"
#include "ataseg/metrics.hpp"
#include "ataseg/scene.hpp"

namespace py = pybind11;
using namespace ataseg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a, int rank) {
  if (a.ndim() != rank) throw UsageError("expected a " + std::to_string(rank) + "-d array");
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Array score_array(const ActiveScoreMap& s) {
  Array out({s.height, s.width});
  std::copy(s.values.begin(), s.values.end(), out.mutable_data());
  return out;
}

ActiveScoreMap to_scores(const Array& a) {
  if (a.ndim() != 2) throw UsageError("expected a 2-d score map");
  ActiveScoreMap s(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), s.values.begin());
  return s;
}

ActiveLabelSet to_labels(const std::vector<std::tuple<int, int, int>>& entries) {
  ActiveLabelSet s;
  for (auto [r, c, k] : entries) s.entries.push_back({r, c, k});
  return s;
}

std::vector<std::pair<int, int>> pixel_pairs(const std::vector<Pixel>& px) {
  std::vector<std::pair<int, int>> out;
  for (const auto& p : px) out.emplace_back(p.row, p.col);
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  return text.empty() ? desk_preset() : config_from_json(nlohmann::json::parse(text));
}

py::array_t<int> label_array(const std::vector<int>& labels, int h, int w) {
  py::array_t<int> out({h, w});
  std::copy(labels.begin(), labels.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_ataseg, m) {
  m.doc() = "Active test-time adaptation core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  // Losses on H x W x C probability arrays.
  m.def("ce_sparse", [](const Array& p, const std::vector<std::tuple<int, int, int>>& labels) {
    return ce_sparse(PredictionMap(to_tensor(p, 3)), to_labels(labels));
  }, py::arg("probs"), py::arg("labels"));
  m.def("ent_full", [](const Array& p) { return ent_full(PredictionMap(to_tensor(p, 3))); });
  m.def("cst", [](const Array& p, const Array& q, const std::string& kind) {
    return cst(PredictionMap(to_tensor(p, 3)), PredictionMap(to_tensor(q, 3)),
               consistency_from_string(kind));
  }, py::arg("p"), py::arg("p_aug"), py::arg("kind") = "sce");
  m.def("softmax", [](const Array& logits) {
    return to_array(softmax_pixels(to_tensor(logits, 3)).tensor());
  });

  // Active scores and selection.
  m.def("score", [](const std::string& kind, const Array& p, int ripu_k) {
    PredictionMap pm(to_tensor(p, 3));
    switch (annotator_from_string(kind)) {
      case AnnotatorKind::kEnt: return score_array(score_ent(pm));
      case AnnotatorKind::kBvsb: return score_array(score_bvsb(pm));
      case AnnotatorKind::kRipu: return score_array(score_ripu(pm, ripu_k));
      case AnnotatorKind::kRand: break;
    }
    throw UsageError("rand scores need an RNG; use annotate()");
  }, py::arg("kind"), py::arg("probs"), py::arg("ripu_k") = 1);
  m.def("select", [](const Array& scores, int budget, std::optional<int> k) {
    return pixel_pairs(select(to_scores(scores), budget, k));
  }, py::arg("scores"), py::arg("budget"), py::arg("suppression_k") = py::none());
  m.def("annotate", [](const Array& p, int budget, const std::string& kind, int ripu_k,
                       std::optional<int> k, std::uint64_t seed) {
    AnnotatorSpec spec;
    spec.kind = annotator_from_string(kind);
    spec.ripu_k = ripu_k;
    spec.suppression_k = k;
    spec.validate();
    PredictionMap pm(to_tensor(p, 3));
    Rng rng(seed);
    auto ann = annotate(spec, pm, ClassFrequencyTracker(static_cast<int>(pm.classes())), rng, budget);
    return pixel_pairs(ann.selected);
  }, py::arg("probs"), py::arg("budget"), py::arg("kind") = "bvsb", py::arg("ripu_k") = 1,
     py::arg("suppression_k") = py::none(), py::arg("seed") = 0);

  // Metrics.
  m.def("miou", [](const std::vector<int>& truth, const std::vector<int>& pred, int classes) {
    ConfusionMatrix cm(classes);
    cm.add_frame(truth, pred);
    return miou(cm).mean;
  }, py::arg("truth"), py::arg("pred"), py::arg("num_classes"));
  m.def("imbalance_degree", [](const std::vector<std::int64_t>& counts) -> std::optional<double> {
    ClassFrequencyTracker t(static_cast<int>(counts.size()));
    for (std::size_t c = 0; c < counts.size(); ++c)
      for (std::int64_t i = 0; i < counts[c]; ++i) t.add(static_cast<int>(c));
    return imbalance_degree(t);
  });
  m.def("mean_pairwise_distance", [](const std::vector<std::pair<int, int>>& px) {
    std::vector<Pixel> pixels;
    for (auto [r, c] : px) pixels.push_back({r, c});
    return mean_pairwise_distance(pixels);
  });

  // Scenes and corruptions.
  m.def("gen_scene", [](int classes, int h, int w, std::uint64_t seed) {
    auto s = gen_scene(classes, h, w, seed);
    return py::make_tuple(to_array(s.image), label_array(s.labels, h, w));
  }, py::arg("num_classes"), py::arg("height"), py::arg("width"), py::arg("seed"));
  m.def("corrupt", [](const Array& image, const std::string& kind, int severity, std::uint64_t seed) {
    return to_array(corrupt(to_tensor(image, 3), {corruption_from_string(kind), severity, seed}));
  }, py::arg("image"), py::arg("kind"), py::arg("severity"), py::arg("seed") = 0);

  // Networks.
  py::class_<SegNet>(m, "SegNet")
      .def_static("default", [](int in, int classes, std::uint64_t seed, std::vector<int> hidden) {
        return SegNet::make_default(in, classes, seed, hidden);
      }, py::arg("input_channels") = 3, py::arg("num_classes") = 5, py::arg("seed") = 0,
         py::arg("hidden") = std::vector<int>{16, 16})
      .def_static("load", [](const std::string& path) { return load_checkpoint(path).net; })
      .def("save", [](const SegNet& n, const std::string& path) { save_checkpoint(path, n); })
      .def_property_readonly("param_count", &SegNet::param_count)
      .def_property_readonly("num_classes", &SegNet::num_classes)
      .def_property("params",
                    [](const SegNet& n) {
                      Array out(static_cast<py::ssize_t>(n.param_count()));
                      std::copy(n.params().begin(), n.params().end(), out.mutable_data());
                      return out;
                    },
                    [](SegNet& n, const Array& p) {
                      n.set_params(std::vector<double>(p.data(), p.data() + p.size()));
                    })
      .def("logits", [](const SegNet& n, const Array& image) {
        return to_array(infer(n, to_tensor(image, 3)));
      })
      .def("predict", [](const SegNet& n, const Array& image, bool flip) {
        return to_array(predict(n, to_tensor(image, 3), flip).tensor());
      }, py::arg("image"), py::arg("flip_ensemble") = false);

  // Configs and experiments; configs and summaries travel as JSON text.
  m.def("default_config_json", [] { return to_json(desk_preset()).dump(); });
  m.def("validate_config_json", [](const std::string& text) {
    return to_json(parse_config(text)).dump();
  });
  m.def("source_network", [](const std::string& cfg_text, const std::string& cache_dir) {
    const auto cfg = parse_config(cfg_text);
    py::gil_scoped_release release;
    return cached_source(cfg.source, cfg.stream.num_classes, cfg.stream.height, cfg.stream.width,
                         cache_dir);
  }, py::arg("config_json") = "", py::arg("cache_dir") = ".ataseg-cache");
  m.def("run_experiment", [](const std::string& cfg_text, const SegNet& source, std::uint64_t seed,
                             const std::string& out_dir) {
    const auto cfg = parse_config(cfg_text);
    RunResult run;
    {
      py::gil_scoped_release release;
      run = run_experiment(cfg, source, seed);
      if (!out_dir.empty()) write_run_artifacts(out_dir, cfg, run);
    }
    return py::make_tuple(run.summary.dump(), run.net);
  }, py::arg("config_json"), py::arg("source"), py::arg("seed") = 0, py::arg("out_dir") = "");
}
