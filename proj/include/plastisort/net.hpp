#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plastisort/preprocess.hpp"
#include "plastisort/tensor.hpp"

namespace plastisort {

enum class LayerKind { Conv, Relu, MaxPool, Lrn, Dropout, Fc, SoftmaxXent };

std::string layer_kind_name(LayerKind k);

struct LayerSpec {
  LayerKind kind;
  // conv
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  // maxpool
  int window = 0;
  int pool_stride = 0;
  // lrn (cross-channel): denom = (k + alpha/n * sum a^2)^beta over a window
  // of n channels centered on the current one
  int lrn_n = 5;
  double lrn_alpha = 1e-4;
  double lrn_beta = 0.75;
  double lrn_k = 1.0;
  // dropout
  double rate = 0.0;
  // fc
  int out_features = 0;

  static LayerSpec conv(int out_channels, int kernel, int stride, int pad);
  static LayerSpec relu();
  static LayerSpec maxpool(int window, int stride);
  static LayerSpec lrn(int n = 5, double alpha = 1e-4, double beta = 0.75, double k = 1.0);
  static LayerSpec dropout(double rate);
  static LayerSpec fc(int out_features);
  static LayerSpec softmax_xent();
};

struct LayerShape {
  int64_t c = 0, h = 0, w = 0;
  int64_t features() const { return c * h * w; }
};

struct NetworkSpec {
  std::string name;
  int64_t in_channels = 3;
  int64_t in_height = 227;
  int64_t in_width = 227;
  int classes = 2;
  std::vector<LayerSpec> layers;

  // Output shape of every layer, index 0 being the input itself. Throws
  // ValidationError if the chain is inconsistent or the last layer is not
  // softmax-xent producing `classes` logits.
  std::vector<LayerShape> shape_chain() const;
  void validate() const { (void)shape_chain(); }
};

// The 8-layer AlexNet shape (5 conv + 3 fc, LRN after conv1/conv2, dropout
// 0.5 on the first two fc layers), 227x227x3 input, 2 classes.
NetworkSpec alexnet_full();
// Same topology with channel counts divided by 8 and 256-wide fc layers.
NetworkSpec alexnet_mini();
// Resolves "alexnet-full" / "alexnet-mini" by name.
NetworkSpec builtin_network(const std::string& name);

template <class T>
struct WeightStoreT {
  struct Entry {
    int layer = 0; // index into NetworkSpec::layers
    TensorT<T> weights;
    TensorT<T> bias;
  };
  std::vector<Entry> entries;
  InputStats stats;

  Entry* find(int layer) {
    for (auto& e : entries)
      if (e.layer == layer) return &e;
    return nullptr;
  }
  const Entry* find(int layer) const {
    for (const auto& e : entries)
      if (e.layer == layer) return &e;
    return nullptr;
  }

  template <class U>
  WeightStoreT<U> cast() const {
    WeightStoreT<U> out;
    out.stats = stats;
    for (const auto& e : entries)
      out.entries.push_back({e.layer, e.weights.template cast<U>(), e.bias.template cast<U>()});
    return out;
  }
};

using WeightStore = WeightStoreT<float>;

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
// Deterministic for a given seed.
template <class T>
WeightStoreT<T> init_weights_t(const NetworkSpec& spec, uint64_t seed);
inline WeightStore init_weights(const NetworkSpec& spec, uint64_t seed) {
  return init_weights_t<float>(spec, seed);
}

struct ForwardOptions {
  bool train = false;
  uint64_t seed = 0;    // dropout mask seed, used only in train mode
  bool checked = false; // scan activations for NaN/Inf after every layer
};

template <class T>
struct ForwardResult {
  std::vector<TensorT<T>> acts; // acts[0] = input, acts[l+1] = output of layer l
  std::vector<std::vector<uint8_t>> drop_mask;
  std::vector<std::vector<int64_t>> pool_argmax; // flat index into the layer input
  std::vector<TensorT<T>> lrn_denom;
  bool train_mode = false;

  const TensorT<T>& logits() const { return acts.back(); }
};

template <class T>
ForwardResult<T> forward(const NetworkSpec& spec, const WeightStoreT<T>& weights,
                         const TensorT<T>& input, const ForwardOptions& opt);

template <class T>
struct BackwardResult {
  double loss = 0.0;          // mean softmax cross-entropy over the batch
  WeightStoreT<T> gradients;  // same shapes as the weight store
  TensorT<T> input_gradient;
};

template <class T>
BackwardResult<T> backward(const NetworkSpec& spec, const WeightStoreT<T>& weights,
                           const ForwardResult<T>& cache, const std::vector<int>& labels);

struct Prediction {
  int cls = 0;
  std::vector<double> probabilities;
};

// Eval-mode forward + softmax; argmax ties go to the lowest index.
Prediction predict(const NetworkSpec& spec, const WeightStore& weights, const Tensor& input);
// Batched variant: input is N x C x H x W, one prediction per row.
std::vector<Prediction> predict_batch(const NetworkSpec& spec, const WeightStore& weights,
                                      const Tensor& input);

// "PSNN" little-endian binary weight format, documented in the README.
void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path,
                         const NetworkSpec* expect = nullptr);

} // namespace plastisort
