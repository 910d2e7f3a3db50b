#include "ataseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ataseg/error.hpp"

namespace ataseg {
namespace {

double safe_log(double p) { return std::log(std::max(p, kLogFloor)); }

void check_labels(const PredictionMap& p, const ActiveLabelSet& labels) {
  for (const auto& e : labels.entries) {
    if (e.row < 0 || e.col < 0 || static_cast<std::size_t>(e.row) >= p.height() ||
        static_cast<std::size_t>(e.col) >= p.width()) {
      throw UsageError("label coordinate (" + std::to_string(e.row) + ", " +
                       std::to_string(e.col) + ") is out of bounds");
    }
    if (e.class_id < 0 || static_cast<std::size_t>(e.class_id) >= p.classes()) {
      throw UsageError("label class " + std::to_string(e.class_id) +
                       " is out of range");
    }
  }
}

void check_same_shape(const PredictionMap& a, const PredictionMap& b) {
  if (a.tensor().shape() != b.tensor().shape()) {
    throw UsageError("prediction maps have different shapes");
  }
}

// Pulls a probability-space cotangent g back through the softmax of one
// pixel and adds it to dz: dz_k += p_k (g_k - sum_c p_c g_c).
void softmax_vjp_add(std::span<const double> p, const double* g, double* dz) {
  double dot = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) dot += p[c] * g[c];
  for (std::size_t k = 0; k < p.size(); ++k) dz[k] += p[k] * (g[k] - dot);
}

double pixel_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * safe_log(v);
  }
  return h;
}

void add_ce_grad(const PredictionMap& p, const ActiveLabelSet& labels,
                 Tensor& dz) {
  if (labels.empty()) return;
  const double inv = 1.0 / static_cast<double>(labels.size());
  for (const auto& e : labels.entries) {
    auto probs = p.pixel(e.row, e.col);
    auto g = dz.pixel(e.row, e.col);
    for (std::size_t k = 0; k < probs.size(); ++k) {
      g[k] += inv * (probs[k] - (static_cast<int>(k) == e.class_id ? 1.0 : 0.0));
    }
  }
}

void add_entropy_grad(const PredictionMap& p, double weight, Tensor& dz) {
  if (weight == 0.0) return;
  const double scale = weight / static_cast<double>(p.pixels());
  for (std::size_t r = 0; r < p.height(); ++r) {
    for (std::size_t c = 0; c < p.width(); ++c) {
      auto probs = p.pixel(r, c);
      auto g = dz.pixel(r, c);
      double plogp = 0.0;
      for (double v : probs) plogp += v * safe_log(v);
      // dH/dz_k = -p_k (log p_k - sum_c p_c log p_c)
      for (std::size_t k = 0; k < probs.size(); ++k) {
        g[k] += scale * -probs[k] * (safe_log(probs[k]) - plogp);
      }
    }
  }
}

// Adds weight * dcst/dz to dz (for the P view) and dz_aug (for the P' view).
// Either output may be null to stop the gradient.
void add_cst_grad(const PredictionMap& p, const PredictionMap& pa,
                  ConsistencyKind kind, double weight, Tensor* dz,
                  Tensor* dz_aug) {
  if (weight == 0.0) return;
  const double scale = weight / static_cast<double>(p.pixels());
  const std::size_t classes = p.classes();
  std::vector<double> g(classes), ga(classes);
  for (std::size_t r = 0; r < p.height(); ++r) {
    for (std::size_t c = 0; c < p.width(); ++c) {
      auto a = p.pixel(r, c);
      auto b = pa.pixel(r, c);
      switch (kind) {
        case ConsistencyKind::kSce: {
          if (dz) {
            for (std::size_t k = 0; k < classes; ++k) g[k] = -scale * safe_log(b[k]);
            softmax_vjp_add(a, g.data(), dz->pixel(r, c).data());
          }
          if (dz_aug) {
            // d/dz'_k of -sum_c p_c log softmax(z')_c
            double mass = 0.0;
            for (double v : a) mass += v;
            auto out = dz_aug->pixel(r, c);
            for (std::size_t k = 0; k < classes; ++k) {
              out[k] += scale * (b[k] * mass - a[k]);
            }
          }
          break;
        }
        case ConsistencyKind::kL1:
        case ConsistencyKind::kMse: {
          for (std::size_t k = 0; k < classes; ++k) {
            const double d = a[k] - b[k];
            const double dd = kind == ConsistencyKind::kL1
                                  ? (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0))
                                  : 2.0 * d;
            g[k] = scale * dd;
            ga[k] = -scale * dd;
          }
          if (dz) softmax_vjp_add(a, g.data(), dz->pixel(r, c).data());
          if (dz_aug) softmax_vjp_add(b, ga.data(), dz_aug->pixel(r, c).data());
          break;
        }
      }
    }
  }
}

double compose_total(const LossBreakdown& l) {
  return l.ce + l.ce_aug + l.lambda_ent * l.ent + l.lambda_cst * l.cst;
}

}  // namespace

std::string to_string(ConsistencyKind kind) {
  switch (kind) {
    case ConsistencyKind::kSce:
      return "sce";
    case ConsistencyKind::kL1:
      return "l1";
    case ConsistencyKind::kMse:
      return "mse";
  }
  return "sce";
}

ConsistencyKind consistency_from_string(const std::string& name) {
  if (name == "sce") return ConsistencyKind::kSce;
  if (name == "l1") return ConsistencyKind::kL1;
  if (name == "mse") return ConsistencyKind::kMse;
  throw ConfigError("unknown consistency kind '" + name + "' (sce|l1|mse)");
}

double ce_sparse(const PredictionMap& p, const ActiveLabelSet& labels) {
  check_labels(p, labels);
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : labels.entries) sum -= safe_log(p.prob(e.row, e.col, e.class_id));
  return sum / static_cast<double>(labels.size());
}

double ent_full(const PredictionMap& p) {
  double sum = 0.0;
  for (std::size_t r = 0; r < p.height(); ++r) {
    for (std::size_t c = 0; c < p.width(); ++c) sum += pixel_entropy(p.pixel(r, c));
  }
  return sum / static_cast<double>(p.pixels());
}

double cst(const PredictionMap& p, const PredictionMap& p_aug,
           ConsistencyKind kind) {
  check_same_shape(p, p_aug);
  double sum = 0.0;
  for (std::size_t r = 0; r < p.height(); ++r) {
    for (std::size_t c = 0; c < p.width(); ++c) {
      auto a = p.pixel(r, c);
      auto b = p_aug.pixel(r, c);
      for (std::size_t k = 0; k < a.size(); ++k) {
        switch (kind) {
          case ConsistencyKind::kSce:
            sum -= a[k] * safe_log(b[k]);
            break;
          case ConsistencyKind::kL1:
            sum += std::abs(a[k] - b[k]);
            break;
          case ConsistencyKind::kMse:
            sum += (a[k] - b[k]) * (a[k] - b[k]);
            break;
        }
      }
    }
  }
  return sum / static_cast<double>(p.pixels());
}

ObjectiveB0 objective_b0(const PredictionMap& p, const ActiveLabelSet& labels,
                         double lambda_ent) {
  ObjectiveB0 out;
  out.loss.ce = ce_sparse(p, labels);
  out.loss.lambda_ent = lambda_ent;
  if (lambda_ent != 0.0) out.loss.ent = ent_full(p);
  out.loss.total = compose_total(out.loss);
  out.dloss_dlogits = Tensor(p.tensor().shape());
  add_ce_grad(p, labels, out.dloss_dlogits);
  add_entropy_grad(p, lambda_ent, out.dloss_dlogits);
  return out;
}

ObjectiveB1 objective_b1(const PredictionMap& p, const PredictionMap& p_aug,
                         const ActiveLabelSet& labels, double lambda_ent,
                         double lambda_cst, ConsistencyKind kind,
                         bool detach_target) {
  check_same_shape(p, p_aug);
  ObjectiveB1 out;
  out.loss.ce = ce_sparse(p, labels);
  out.loss.ce_aug = ce_sparse(p_aug, labels);
  out.loss.lambda_ent = lambda_ent;
  out.loss.lambda_cst = lambda_cst;
  if (lambda_ent != 0.0) out.loss.ent = ent_full(p);
  if (lambda_cst != 0.0) out.loss.cst = cst(p, p_aug, kind);
  out.loss.total = compose_total(out.loss);
  out.dloss_dlogits = Tensor(p.tensor().shape());
  out.dloss_dlogits_aug = Tensor(p.tensor().shape());
  add_ce_grad(p, labels, out.dloss_dlogits);
  add_ce_grad(p_aug, labels, out.dloss_dlogits_aug);
  add_entropy_grad(p, lambda_ent, out.dloss_dlogits);
  add_cst_grad(p, p_aug, kind, lambda_cst,
               detach_target ? nullptr : &out.dloss_dlogits,
               &out.dloss_dlogits_aug);
  return out;
}

}  // namespace ataseg
