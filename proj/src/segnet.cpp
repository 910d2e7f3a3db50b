#include "ataseg/segnet.hpp"

#include <cmath>
#include <random>

#include "ataseg/error.hpp"
#include "ataseg/rng.hpp"

namespace ataseg {
namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kIdentity:
      return x;
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
    case Activation::kSilu:
      return x / (1.0 + std::exp(-x));
  }
  return x;
}

double activate_grad(Activation a, double x) {
  switch (a) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::kSilu: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 + x * (1.0 - s));
    }
  }
  return 1.0;
}

void conv_forward(const ConvLayer& layer, const double* weights,
                  const double* bias, const Tensor& in, Tensor& out) {
  const int h = static_cast<int>(in.dim(0));
  const int w = static_cast<int>(in.dim(1));
  const int k = layer.kernel;
  const int pad = k / 2;
  const int cin = layer.in_channels;
  const int cout = layer.out_channels;
  const double* src = in.data().data();
  double* dst = out.data().data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double* acc = dst + (static_cast<std::size_t>(y) * w + x) * cout;
      for (int o = 0; o < cout; ++o) acc[o] = bias[o];
      for (int ky = 0; ky < k; ++ky) {
        const int yy = y + ky - pad;
        if (yy < 0 || yy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int xx = x + kx - pad;
          if (xx < 0 || xx >= w) continue;
          const double* ip = src + (static_cast<std::size_t>(yy) * w + xx) * cin;
          const double* wp = weights + static_cast<std::size_t>(ky * k + kx) * cin * cout;
          for (int i = 0; i < cin; ++i) {
            const double v = ip[i];
            const double* wr = wp + static_cast<std::size_t>(i) * cout;
            for (int o = 0; o < cout; ++o) acc[o] += wr[o] * v;
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients and, when din is non-null, the input
// gradient.
void conv_backward(const ConvLayer& layer, const double* weights,
                   const Tensor& in, const Tensor& dpre, double* dweights,
                   double* dbias, Tensor* din) {
  const int h = static_cast<int>(in.dim(0));
  const int w = static_cast<int>(in.dim(1));
  const int k = layer.kernel;
  const int pad = k / 2;
  const int cin = layer.in_channels;
  const int cout = layer.out_channels;
  const double* src = in.data().data();
  const double* g_all = dpre.data().data();
  double* dsrc = din ? din->data().data() : nullptr;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double* g = g_all + (static_cast<std::size_t>(y) * w + x) * cout;
      for (int o = 0; o < cout; ++o) dbias[o] += g[o];
      for (int ky = 0; ky < k; ++ky) {
        const int yy = y + ky - pad;
        if (yy < 0 || yy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int xx = x + kx - pad;
          if (xx < 0 || xx >= w) continue;
          const std::size_t pix = static_cast<std::size_t>(yy) * w + xx;
          const double* ip = src + pix * cin;
          const std::size_t tap = static_cast<std::size_t>(ky * k + kx) * cin * cout;
          const double* wp = weights + tap;
          double* dwp = dweights + tap;
          for (int i = 0; i < cin; ++i) {
            const double v = ip[i];
            const double* wr = wp + static_cast<std::size_t>(i) * cout;
            double* dwr = dwp + static_cast<std::size_t>(i) * cout;
            double s = 0.0;
            for (int o = 0; o < cout; ++o) {
              dwr[o] += v * g[o];
              s += wr[o] * g[o];
            }
            if (dsrc) dsrc[pix * cin + i] += s;
          }
        }
      }
    }
  }
}

void check_image(const SegNet& net, const Tensor& image) {
  if (net.layers().empty()) throw ConfigError("network has no layers");
  if (image.rank() != 3 ||
      image.dim(2) != static_cast<std::size_t>(net.input_channels())) {
    throw ConfigError("image must be H x W x " +
                      std::to_string(net.input_channels()));
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kSilu:
      return "silu";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "silu") return Activation::kSilu;
  throw ConfigError("unknown activation '" + name + "'");
}

SegNet::SegNet(std::vector<ConvLayer> layers) : layers_(std::move(layers)) {
  validate_topology();
  std::size_t total = 0;
  for (const auto& l : layers_) {
    offsets_.push_back(total);
    total += l.param_count();
  }
  params_.assign(total, 0.0);
}

SegNet::SegNet(std::vector<ConvLayer> layers, std::vector<double> params)
    : SegNet(std::move(layers)) {
  set_params(std::move(params));
}

void SegNet::set_params(std::vector<double> params) {
  if (params.size() != params_.size()) {
    throw UsageError("parameter vector has length " +
                     std::to_string(params.size()) + ", expected " +
                     std::to_string(params_.size()));
  }
  params_ = std::move(params);
  ++version_;
}

void SegNet::validate_topology() const {
  if (layers_.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.kernel <= 0 || l.kernel % 2 == 0) {
      throw ConfigError("layer " + std::to_string(i) + ": kernel must be odd");
    }
    if (l.in_channels <= 0 || l.out_channels <= 0) {
      throw ConfigError("layer " + std::to_string(i) +
                        ": channel counts must be positive");
    }
    if (i > 0 && l.in_channels != layers_[i - 1].out_channels) {
      throw ConfigError("layer " + std::to_string(i) +
                        ": input channels do not match previous layer");
    }
  }
}

SegNet SegNet::make_default(int input_channels, int num_classes,
                            std::uint64_t seed, std::vector<int> hidden,
                            Activation act) {
  std::vector<ConvLayer> layers;
  int prev = input_channels;
  for (int width : hidden) {
    layers.push_back({3, prev, width, act});
    prev = width;
  }
  layers.push_back({1, prev, num_classes, Activation::kIdentity});
  SegNet net(layers);
  Rng rng(mix_seed(seed, seed_tag::kInit));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto params = net.mutable_params();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& l = layers[li];
    const double fan_in = static_cast<double>(l.kernel * l.kernel * l.in_channels);
    const double scale = std::sqrt(2.0 / fan_in);
    const std::size_t off = net.layer_offset(li);
    for (std::size_t j = 0; j < l.weight_count(); ++j) {
      params[off + j] = scale * normal(rng);
    }
  }
  return net;
}

ForwardResult forward(const SegNet& net, const Tensor& image) {
  check_image(net, image);
  const std::size_t h = image.dim(0), w = image.dim(1);
  ForwardResult result;
  GradientTape& tape = result.tape;
  tape.inputs_.reserve(net.layers().size());
  tape.pre_activations_.reserve(net.layers().size());
  Tensor current = image;
  const auto params = net.params();
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    const auto& layer = net.layers()[li];
    const double* weights = params.data() + net.layer_offset(li);
    Tensor pre = Tensor::image(h, w, layer.out_channels);
    conv_forward(layer, weights, weights + layer.weight_count(), current, pre);
    Tensor post = pre;
    if (layer.activation != Activation::kIdentity) {
      for (double& v : post.data()) v = activate(layer.activation, v);
    }
    tape.inputs_.push_back(std::move(current));
    tape.pre_activations_.push_back(std::move(pre));
    current = std::move(post);
  }
  result.logits = std::move(current);
  tape.net_version_ = net.version();
  tape.net_id_ = &net;
  tape.valid_ = true;
  return result;
}

Tensor infer(const SegNet& net, const Tensor& image) {
  check_image(net, image);
  const std::size_t h = image.dim(0), w = image.dim(1);
  Tensor current = image;
  const auto params = net.params();
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    const auto& layer = net.layers()[li];
    const double* weights = params.data() + net.layer_offset(li);
    Tensor out = Tensor::image(h, w, layer.out_channels);
    conv_forward(layer, weights, weights + layer.weight_count(), current, out);
    if (layer.activation != Activation::kIdentity) {
      for (double& v : out.data()) v = activate(layer.activation, v);
    }
    current = std::move(out);
  }
  return current;
}

std::vector<double> backward(const SegNet& net, GradientTape&& tape,
                             const Tensor& dloss_dlogits) {
  if (!tape.valid_) throw UsageError("backward called with an absent or consumed tape");
  if (tape.net_id_ != &net || tape.net_version_ != net.version()) {
    throw UsageError("backward called with a stale tape");
  }
  tape.valid_ = false;
  const auto& last_pre = tape.pre_activations_.back();
  if (dloss_dlogits.shape() != last_pre.shape()) {
    throw UsageError("logit gradient shape does not match forward output");
  }
  std::vector<double> grad(net.param_count(), 0.0);
  const auto params = net.params();
  Tensor upstream = dloss_dlogits;
  for (std::size_t li = net.layers().size(); li-- > 0;) {
    const auto& layer = net.layers()[li];
    const Tensor& pre = tape.pre_activations_[li];
    if (layer.activation != Activation::kIdentity) {
      auto u = upstream.data();
      auto z = pre.data();
      for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] *= activate_grad(layer.activation, z[i]);
      }
    }
    const Tensor& in = tape.inputs_[li];
    const std::size_t off = net.layer_offset(li);
    Tensor din;
    if (li > 0) din = Tensor(in.shape());
    conv_backward(layer, params.data() + off, in, upstream, grad.data() + off,
                  grad.data() + off + layer.weight_count(),
                  li > 0 ? &din : nullptr);
    upstream = std::move(din);
  }
  return grad;
}

}  // namespace ataseg
