#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "xrprobe/error.hpp"
#include "xrprobe/nn/layers.hpp"
#include "xrprobe/nn/tensor.hpp"
#include "xrprobe/rng.hpp"

namespace xrprobe::probe {

// Stream ids for counter-based randomness inside one training run.
inline constexpr std::uint64_t kStreamInitCls = 1;
inline constexpr std::uint64_t kStreamInitSeg = 2;
inline constexpr std::uint64_t kStreamShuffle = 3;
inline constexpr std::uint64_t kStreamDropout = 4;

enum class LossKind { CE, BCE };

/// 3-layer MLP on CLS vectors: d -> h1 -> h2 -> C with ReLU and dropout after
/// each hidden layer. Zero hidden widths default to d/2 and d/4 (at least 1).
struct MlpProbeConfig {
  std::size_t in_dim = 0;
  std::size_t hidden1 = 0;
  std::size_t hidden2 = 0;
  std::size_t out_dim = 1;
  double dropout = 0.2;
  LossKind loss = LossKind::BCE;

  std::size_t h1() const { return hidden1 ? hidden1 : std::max<std::size_t>(in_dim / 2, 1); }
  std::size_t h2() const { return hidden2 ? hidden2 : std::max<std::size_t>(in_dim / 4, 1); }
};

/// Conv stack over the patch grid, then adaptive average pooling and a linear
/// classifier. Default layers are the (1x1, 3x3, 1x1) bottleneck with
/// channels (d/4, d/4, d).
struct ConvLayerSpec {
  std::size_t kernel;
  std::size_t channels;
};

struct ConvProbeConfig {
  std::size_t in_dim = 0;
  std::vector<ConvLayerSpec> layers;  // empty = default bottleneck
  std::size_t out_dim = 1;
  LossKind loss = LossKind::BCE;

  std::vector<ConvLayerSpec> resolved() const {
    if (!layers.empty()) return layers;
    const std::size_t q = std::max<std::size_t>(in_dim / 4, 1);
    return {{1, q}, {3, q}, {1, in_dim}};
  }

  /// Deeper head: five conv layers at half the feature width.
  static ConvProbeConfig deep_preset(std::size_t d, std::size_t out_dim) {
    const std::size_t h = std::max<std::size_t>(d / 2, 1);
    return {d, {{1, h}, {3, h}, {3, h}, {3, h}, {1, h}}, out_dim, LossKind::BCE};
  }
};

/// 1x1 conv d -> K over the patch grid, bilinear upsampling to mask size.
/// K = 1 (sigmoid) for binary masks, else K = num_classes (softmax).
struct SegDecoderConfig {
  std::size_t in_dim = 0;
  int num_classes = 2;
  std::size_t out_rows = 0, out_cols = 0;

  std::size_t channels() const { return num_classes <= 2 ? 1 : static_cast<std::size_t>(num_classes); }
};

inline const char* to_string(LossKind k) { return k == LossKind::CE ? "CE" : "BCE"; }
inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "CE") return LossKind::CE;
  if (s == "BCE") return LossKind::BCE;
  throw ConfigError("unknown loss '" + s + "'");
}

inline nlohmann::json to_json(const MlpProbeConfig& c) {
  return {{"kind", "mlp"}, {"in_dim", c.in_dim}, {"hidden", {c.h1(), c.h2()}}, {"out_dim", c.out_dim},
          {"dropout", c.dropout}, {"loss", to_string(c.loss)}};
}

inline nlohmann::json to_json(const ConvProbeConfig& c) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : c.resolved()) layers.push_back({l.kernel, l.channels});
  return {{"kind", "conv"}, {"in_dim", c.in_dim}, {"layers", layers}, {"out_dim", c.out_dim}, {"loss", to_string(c.loss)}};
}

inline nlohmann::json to_json(const SegDecoderConfig& c) {
  return {{"kind", "seg"}, {"in_dim", c.in_dim}, {"num_classes", c.num_classes}, {"out_size", {c.out_rows, c.out_cols}}};
}

inline MlpProbeConfig mlp_config_from_json(const nlohmann::json& j) {
  MlpProbeConfig c;
  c.in_dim = j.at("in_dim");
  c.hidden1 = j.at("hidden").at(0);
  c.hidden2 = j.at("hidden").at(1);
  c.out_dim = j.at("out_dim");
  c.dropout = j.at("dropout");
  c.loss = parse_loss_kind(j.at("loss"));
  return c;
}

inline ConvProbeConfig conv_config_from_json(const nlohmann::json& j) {
  ConvProbeConfig c;
  c.in_dim = j.at("in_dim");
  for (const auto& l : j.at("layers")) c.layers.push_back({l.at(0), l.at(1)});
  c.out_dim = j.at("out_dim");
  c.loss = parse_loss_kind(j.at("loss"));
  return c;
}

inline SegDecoderConfig seg_config_from_json(const nlohmann::json& j) {
  SegDecoderConfig c;
  c.in_dim = j.at("in_dim");
  c.num_classes = j.at("num_classes");
  c.out_rows = j.at("out_size").at(0);
  c.out_cols = j.at("out_size").at(1);
  return c;
}

template <class T>
class MlpProbe {
 public:
  explicit MlpProbe(const MlpProbeConfig& cfg)
      : cfg_(cfg),
        l1_(cfg.in_dim, cfg.h1()),
        l2_(cfg.h1(), cfg.h2()),
        l3_(cfg.h2(), cfg.out_dim),
        d1_(cfg.dropout),
        d2_(cfg.dropout) {
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  }

  void init(CounterRng& rng) {
    l1_.init(rng);
    l2_.init(rng);
    l3_.init(rng);
  }

  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training = false, CounterRng* rng = nullptr) {
    auto h = d1_.forward(r1_.forward(l1_.forward(x)), training, rng);
    h = d2_.forward(r2_.forward(l2_.forward(h)), training, rng);
    return l3_.forward(h);
  }

  nn::Tensor<T> backward(const nn::Tensor<T>& dlogits) {
    auto g = l3_.backward(dlogits);
    g = l2_.backward(r2_.backward(d2_.backward(g)));
    return l1_.backward(r1_.backward(d1_.backward(g)));
  }

  nn::ParamList<T> params() {
    nn::ParamList<T> ps;
    l1_.collect(ps);
    l2_.collect(ps);
    l3_.collect(ps);
    return ps;
  }

  /// Smallest |pre-activation| of the hidden ReLUs in the last forward pass.
  double min_abs_preactivation() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto* r : {&r1_, &r2_})
      for (T v : r->pre_activation().data) m = std::min(m, std::abs(double(v)));
    return m;
  }

  const MlpProbeConfig& config() const noexcept { return cfg_; }
  nlohmann::json descriptor() const { return to_json(cfg_); }

 private:
  MlpProbeConfig cfg_;
  nn::Linear<T> l1_, l2_, l3_;
  nn::ReLU<T> r1_, r2_;
  nn::Dropout<T> d1_, d2_;
};

template <class T>
class ConvProbe {
 public:
  explicit ConvProbe(const ConvProbeConfig& cfg) : cfg_(cfg) {
    std::size_t in = cfg.in_dim;
    for (const auto& l : cfg.resolved()) {
      convs_.emplace_back(in, l.channels, l.kernel);
      in = l.channels;
    }
    relus_.resize(convs_.size());
    head_ = nn::Linear<T>(in, cfg.out_dim);
  }

  void init(CounterRng& rng) {
    for (auto& c : convs_) c.init(rng);
    head_.init(rng);
  }

  nn::Tensor<T> forward(const nn::Tensor<T>& grid) {
    nn::Tensor<T> h = grid;
    for (std::size_t i = 0; i < convs_.size(); ++i) h = relus_[i].forward(convs_[i].forward(h));
    return head_.forward(pool_.forward(h));
  }

  nn::Tensor<T> backward(const nn::Tensor<T>& dlogits) {
    auto g = pool_.backward(head_.backward(dlogits));
    for (std::size_t i = convs_.size(); i-- > 0;) g = convs_[i].backward(relus_[i].backward(g));
    return g;
  }

  nn::ParamList<T> params() {
    nn::ParamList<T> ps;
    for (auto& c : convs_) c.collect(ps);
    head_.collect(ps);
    return ps;
  }

  double min_abs_preactivation() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& r : relus_)
      for (T v : r.pre_activation().data) m = std::min(m, std::abs(double(v)));
    return m;
  }

  const ConvProbeConfig& config() const noexcept { return cfg_; }
  nlohmann::json descriptor() const { return to_json(cfg_); }

 private:
  ConvProbeConfig cfg_;
  std::vector<nn::Conv2d<T>> convs_;
  std::vector<nn::ReLU<T>> relus_;
  nn::GlobalAvgPool<T> pool_;
  nn::Linear<T> head_;
};

template <class T>
class SegDecoder {
 public:
  explicit SegDecoder(const SegDecoderConfig& cfg)
      : cfg_(cfg), conv_(cfg.in_dim, cfg.channels(), 1), up_(cfg.out_rows, cfg.out_cols) {}

  void init(CounterRng& rng) { conv_.init(rng); }

  /// Logits of shape (batch, out_rows, out_cols, K).
  nn::Tensor<T> forward(const nn::Tensor<T>& grid) { return up_.forward(conv_.forward(grid)); }
  nn::Tensor<T> backward(const nn::Tensor<T>& dlogits) { return conv_.backward(up_.backward(dlogits)); }

  nn::ParamList<T> params() {
    nn::ParamList<T> ps;
    conv_.collect(ps);
    return ps;
  }

  const SegDecoderConfig& config() const noexcept { return cfg_; }
  nlohmann::json descriptor() const { return to_json(cfg_); }

 private:
  SegDecoderConfig cfg_;
  nn::Conv2d<T> conv_;
  nn::BilinearUpsample<T> up_;
};

}  // namespace xrprobe::probe
