#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ataseg/tensor.hpp"

namespace ataseg {

enum class Activation { kIdentity, kRelu, kSilu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// One stride-1 zero-padded convolution. Weights are stored tap-major:
// [kernel*kernel][in_channels][out_channels], followed by out_channels biases.
struct ConvLayer {
  int kernel = 3;
  int in_channels = 0;
  int out_channels = 0;
  Activation activation = Activation::kSilu;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(kernel) * kernel * in_channels *
           out_channels;
  }
  std::size_t param_count() const { return weight_count() + out_channels; }
  bool operator==(const ConvLayer&) const = default;
};

// Small fully convolutional segmentation network with a flat parameter
// vector. Spatial size is preserved by every layer.
class SegNet {
 public:
  SegNet() = default;
  // Parameters are zero-initialised.
  explicit SegNet(std::vector<ConvLayer> layers);
  SegNet(std::vector<ConvLayer> layers, std::vector<double> params);

  // conv3x3 -> conv3x3 -> conv1x1 head, He-style init from seed.
  static SegNet make_default(int input_channels, int num_classes,
                             std::uint64_t seed,
                             std::vector<int> hidden = {16, 16},
                             Activation act = Activation::kSilu);

  const std::vector<ConvLayer>& layers() const { return layers_; }
  std::span<const double> params() const { return params_; }
  // Any mutable access invalidates outstanding gradient tapes.
  std::span<double> mutable_params() {
    ++version_;
    return params_;
  }
  void set_params(std::vector<double> params);

  std::size_t param_count() const { return params_.size(); }
  std::size_t layer_offset(std::size_t layer) const { return offsets_[layer]; }
  int input_channels() const { return layers_.front().in_channels; }
  int num_classes() const { return layers_.back().out_channels; }
  std::uint64_t version() const { return version_; }

 private:
  void validate_topology() const;

  std::vector<ConvLayer> layers_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
  std::uint64_t version_ = 0;
};

struct ForwardResult;

// Activations cached by forward() and consumed by backward(). A tape is
// bound to the parameter version it was recorded against and can be used
// once; moving from a tape invalidates the source.
class GradientTape {
 public:
  GradientTape() = default;
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;
  GradientTape(GradientTape&& other) noexcept { *this = std::move(other); }
  GradientTape& operator=(GradientTape&& other) noexcept {
    inputs_ = std::move(other.inputs_);
    pre_activations_ = std::move(other.pre_activations_);
    net_version_ = other.net_version_;
    net_id_ = other.net_id_;
    valid_ = other.valid_;
    other.valid_ = false;
    return *this;
  }

  bool valid() const { return valid_; }

 private:
  friend ForwardResult forward(const SegNet& net, const Tensor& image);
  friend std::vector<double> backward(const SegNet& net, GradientTape&& tape,
                                      const Tensor& dloss_dlogits);

  std::vector<Tensor> inputs_;
  std::vector<Tensor> pre_activations_;
  std::uint64_t net_version_ = 0;
  const SegNet* net_id_ = nullptr;
  bool valid_ = false;
};

struct ForwardResult {
  Tensor logits;
  GradientTape tape;
};

// Runs the network on an H x W x in_channels image.
ForwardResult forward(const SegNet& net, const Tensor& image);

// Logits only, no tape.
Tensor infer(const SegNet& net, const Tensor& image);

// Reverse-mode pass: returns dLoss/dParams for the loss whose logit gradient
// is given. Throws UsageError on a stale, consumed or foreign tape.
std::vector<double> backward(const SegNet& net, GradientTape&& tape,
                             const Tensor& dloss_dlogits);

}  // namespace ataseg
