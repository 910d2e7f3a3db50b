#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ataseg {

struct AdamConfig {
  // 6e-5 / 8
  double lr = 7.5e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step_count = 0;
  double lr = 7.5e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(std::size_t n, const AdamConfig& config);
  bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam update in place.
void adam_step(std::span<double> params, std::span<const double> grad,
               AdamState& state);

}  // namespace ataseg
