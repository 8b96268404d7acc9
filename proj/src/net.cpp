#include "plastisort/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "plastisort/kernels.hpp"
#include "plastisort/rng.hpp"

namespace plastisort {

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Lrn: return "lrn";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Fc: return "fc";
    case LayerKind::SoftmaxXent: return "softmax-xent";
  }
  return "?";
}

LayerSpec LayerSpec::conv(int out_channels, int kernel, int stride, int pad) {
  LayerSpec l{LayerKind::Conv};
  l.out_channels = out_channels;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  return l;
}
LayerSpec LayerSpec::relu() { return LayerSpec{LayerKind::Relu}; }
LayerSpec LayerSpec::maxpool(int window, int stride) {
  LayerSpec l{LayerKind::MaxPool};
  l.window = window;
  l.pool_stride = stride;
  return l;
}
LayerSpec LayerSpec::lrn(int n, double alpha, double beta, double k) {
  LayerSpec l{LayerKind::Lrn};
  l.lrn_n = n;
  l.lrn_alpha = alpha;
  l.lrn_beta = beta;
  l.lrn_k = k;
  return l;
}
LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec l{LayerKind::Dropout};
  l.rate = rate;
  return l;
}
LayerSpec LayerSpec::fc(int out_features) {
  LayerSpec l{LayerKind::Fc};
  l.out_features = out_features;
  return l;
}
LayerSpec LayerSpec::softmax_xent() { return LayerSpec{LayerKind::SoftmaxXent}; }

std::vector<LayerShape> NetworkSpec::shape_chain() const {
  if (layers.empty()) throw ValidationError("network has no layers");
  if (in_channels < 1 || in_height < 1 || in_width < 1)
    throw ValidationError("network input shape must be positive");
  if (classes < 2) throw ValidationError("network needs at least 2 classes");
  std::vector<LayerShape> chain;
  chain.push_back({in_channels, in_height, in_width});
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    LayerShape s = chain.back();
    const std::string where = "layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) + ")";
    const bool last = i + 1 == layers.size();
    if (l.kind == LayerKind::SoftmaxXent) {
      if (!last) throw ValidationError(where + ": softmax-xent must be the final layer");
      if (s.features() != classes)
        throw ValidationError(where + ": expects " + std::to_string(classes) +
                              " logits, got " + std::to_string(s.features()));
    } else if (last) {
      throw ValidationError("network must end with softmax-xent");
    }
    switch (l.kind) {
      case LayerKind::Conv: {
        if (l.out_channels < 1 || l.kernel < 1 || l.stride < 1 || l.pad < 0)
          throw ValidationError(where + ": bad conv parameters");
        int64_t oh = (s.h + 2 * l.pad - l.kernel) / l.stride + 1;
        int64_t ow = (s.w + 2 * l.pad - l.kernel) / l.stride + 1;
        if (s.h + 2 * l.pad < l.kernel || s.w + 2 * l.pad < l.kernel || oh < 1 || ow < 1)
          throw ValidationError(where + ": kernel larger than padded input");
        s = {l.out_channels, oh, ow};
        break;
      }
      case LayerKind::MaxPool: {
        if (l.window < 1 || l.pool_stride < 1)
          throw ValidationError(where + ": bad maxpool parameters");
        if (s.h < l.window || s.w < l.window)
          throw ValidationError(where + ": window larger than input");
        s = {s.c, (s.h - l.window) / l.pool_stride + 1, (s.w - l.window) / l.pool_stride + 1};
        break;
      }
      case LayerKind::Lrn:
        if (l.lrn_n < 1 || l.lrn_alpha <= 0 || l.lrn_beta <= 0 || l.lrn_k <= 0)
          throw ValidationError(where + ": bad lrn parameters");
        break;
      case LayerKind::Dropout:
        if (!(l.rate >= 0.0 && l.rate < 1.0))
          throw ValidationError(where + ": dropout rate must be in [0,1)");
        break;
      case LayerKind::Fc:
        if (l.out_features < 1) throw ValidationError(where + ": bad fc width");
        s = {l.out_features, 1, 1};
        break;
      case LayerKind::Relu:
      case LayerKind::SoftmaxXent:
        break;
    }
    chain.push_back(s);
  }
  if (layers.back().kind != LayerKind::SoftmaxXent)
    throw ValidationError("network must end with softmax-xent");
  return chain;
}

NetworkSpec alexnet_full() {
  NetworkSpec n;
  n.name = "alexnet-full";
  n.in_channels = 3;
  n.in_height = n.in_width = 227;
  n.classes = 2;
  n.layers = {
      LayerSpec::conv(96, 11, 4, 0), LayerSpec::relu(), LayerSpec::lrn(),
      LayerSpec::maxpool(3, 2),
      LayerSpec::conv(256, 5, 1, 2), LayerSpec::relu(), LayerSpec::lrn(),
      LayerSpec::maxpool(3, 2),
      LayerSpec::conv(384, 3, 1, 1), LayerSpec::relu(),
      LayerSpec::conv(384, 3, 1, 1), LayerSpec::relu(),
      LayerSpec::conv(256, 3, 1, 1), LayerSpec::relu(),
      LayerSpec::maxpool(3, 2),
      LayerSpec::fc(4096), LayerSpec::relu(), LayerSpec::dropout(0.5),
      LayerSpec::fc(4096), LayerSpec::relu(), LayerSpec::dropout(0.5),
      LayerSpec::fc(2), LayerSpec::softmax_xent(),
  };
  return n;
}

NetworkSpec alexnet_mini() {
  NetworkSpec n;
  n.name = "alexnet-mini";
  n.in_channels = 3;
  n.in_height = n.in_width = 227;
  n.classes = 2;
  n.layers = {
      LayerSpec::conv(12, 11, 4, 0), LayerSpec::relu(), LayerSpec::lrn(),
      LayerSpec::maxpool(3, 2),
      LayerSpec::conv(32, 5, 1, 2), LayerSpec::relu(), LayerSpec::lrn(),
      LayerSpec::maxpool(3, 2),
      LayerSpec::conv(48, 3, 1, 1), LayerSpec::relu(),
      LayerSpec::conv(48, 3, 1, 1), LayerSpec::relu(),
      LayerSpec::conv(32, 3, 1, 1), LayerSpec::relu(),
      LayerSpec::maxpool(3, 2),
      LayerSpec::fc(256), LayerSpec::relu(), LayerSpec::dropout(0.5),
      LayerSpec::fc(256), LayerSpec::relu(), LayerSpec::dropout(0.5),
      LayerSpec::fc(2), LayerSpec::softmax_xent(),
  };
  return n;
}

NetworkSpec builtin_network(const std::string& name) {
  if (name == "alexnet-full") return alexnet_full();
  if (name == "alexnet-mini") return alexnet_mini();
  throw ValidationError("unknown network: " + name);
}

template <class T>
WeightStoreT<T> init_weights_t(const NetworkSpec& spec, uint64_t seed) {
  auto chain = spec.shape_chain();
  WeightStoreT<T> ws;
  Pcg32 rng(mix_seed(seed, rng_stream::kWeights), 0);
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.kind == LayerKind::Conv) {
      int64_t in_c = chain[i].c;
      double fan_in = static_cast<double>(in_c) * l.kernel * l.kernel;
      double fan_out = static_cast<double>(l.out_channels) * l.kernel * l.kernel;
      double bound = std::sqrt(6.0 / (fan_in + fan_out));
      typename WeightStoreT<T>::Entry e;
      e.layer = static_cast<int>(i);
      e.weights = TensorT<T>({l.out_channels, in_c, l.kernel, l.kernel});
      for (T& v : e.weights.data) v = static_cast<T>(rng.uniform(-bound, bound));
      e.bias = TensorT<T>({l.out_channels});
      ws.entries.push_back(std::move(e));
    } else if (l.kind == LayerKind::Fc) {
      int64_t in_f = chain[i].features();
      double bound = std::sqrt(6.0 / (static_cast<double>(in_f) + l.out_features));
      typename WeightStoreT<T>::Entry e;
      e.layer = static_cast<int>(i);
      e.weights = TensorT<T>({l.out_features, in_f});
      for (T& v : e.weights.data) v = static_cast<T>(rng.uniform(-bound, bound));
      e.bias = TensorT<T>({l.out_features});
      ws.entries.push_back(std::move(e));
    }
  }
  return ws;
}

template WeightStoreT<float> init_weights_t<float>(const NetworkSpec&, uint64_t);
template WeightStoreT<double> init_weights_t<double>(const NetworkSpec&, uint64_t);

namespace {

template <class T>
void conv_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias,
                  const LayerSpec& l, int64_t oh, int64_t ow, TensorT<T>& y) {
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t OC = w.dim(0);
  const int64_t kcol = C * l.kernel * l.kernel;
  const int64_t S = oh * ow;
#pragma omp parallel for schedule(static) if (B > 1)
  for (int64_t b = 0; b < B; ++b) {
    std::vector<T> col(static_cast<size_t>(kcol) * S);
    kernels::im2col(x.data.data() + b * C * H * W, C, H, W, l.kernel, l.kernel, l.stride,
                    l.pad, oh, ow, col.data());
    T* yb = y.data.data() + b * OC * S;
    kernels::gemm_nn(OC, S, kcol, w.data.data(), col.data(), yb, false);
    for (int64_t oc = 0; oc < OC; ++oc) {
      const T bv = bias.data[static_cast<size_t>(oc)];
      for (int64_t s = 0; s < S; ++s) yb[oc * S + s] += bv;
    }
  }
}

template <class T>
void conv_backward(const TensorT<T>& x, const TensorT<T>& w, const LayerSpec& l,
                   const TensorT<T>& dy, int64_t oh, int64_t ow, TensorT<T>& dw,
                   TensorT<T>& db, TensorT<T>& dx) {
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t OC = w.dim(0);
  const int64_t kcol = C * l.kernel * l.kernel;
  const int64_t S = oh * ow;

  // Weight gradient: batch items accumulate in a fixed serial order; the
  // GEMM inside parallelizes over the (oc, kcol) output tiles.
  {
    std::vector<T> col(static_cast<size_t>(kcol) * S);
    std::vector<T> colT(static_cast<size_t>(kcol) * S);
    for (int64_t b = 0; b < B; ++b) {
      kernels::im2col(x.data.data() + b * C * H * W, C, H, W, l.kernel, l.kernel, l.stride,
                      l.pad, oh, ow, col.data());
      kernels::transpose(kcol, S, col.data(), colT.data());
      kernels::gemm_nn(OC, kcol, S, dy.data.data() + b * OC * S, colT.data(),
                       dw.data.data(), true);
    }
  }

#pragma omp parallel for schedule(static)
  for (int64_t oc = 0; oc < OC; ++oc) {
    T acc = T(0);
    for (int64_t b = 0; b < B; ++b) {
      const T* dyb = dy.data.data() + (b * OC + oc) * S;
      for (int64_t s = 0; s < S; ++s) acc += dyb[s];
    }
    db.data[static_cast<size_t>(oc)] = acc;
  }

  std::vector<T> wT(w.data.size());
  kernels::transpose(OC, kcol, w.data.data(), wT.data());
#pragma omp parallel for schedule(static) if (B > 1)
  for (int64_t b = 0; b < B; ++b) {
    std::vector<T> dcol(static_cast<size_t>(kcol) * S);
    kernels::gemm_nn(kcol, S, OC, wT.data(), dy.data.data() + b * OC * S, dcol.data(),
                     false);
    kernels::col2im_accumulate(dcol.data(), C, H, W, l.kernel, l.kernel, l.stride, l.pad,
                               oh, ow, dx.data.data() + b * C * H * W);
  }
}

template <class T>
void fc_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias,
                TensorT<T>& y) {
  const int64_t B = x.dim(0);
  const int64_t F = x.size() / B;
  const int64_t O = w.dim(0);
  std::vector<T> wT(w.data.size());
  kernels::transpose(O, F, w.data.data(), wT.data());
  kernels::gemm_nn(B, O, F, x.data.data(), wT.data(), y.data.data(), false);
#pragma omp parallel for schedule(static)
  for (int64_t b = 0; b < B; ++b) {
    T* yb = y.data.data() + b * O;
    for (int64_t o = 0; o < O; ++o) yb[o] += bias.data[static_cast<size_t>(o)];
  }
}

template <class T>
void fc_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy,
                 TensorT<T>& dw, TensorT<T>& db, TensorT<T>& dx) {
  const int64_t B = x.dim(0);
  const int64_t F = x.size() / B;
  const int64_t O = w.dim(0);
  std::vector<T> dyT(dy.data.size());
  kernels::transpose(B, O, dy.data.data(), dyT.data());
  kernels::gemm_nn(O, F, B, dyT.data(), x.data.data(), dw.data.data(), false);
#pragma omp parallel for schedule(static)
  for (int64_t o = 0; o < O; ++o) {
    T acc = T(0);
    for (int64_t b = 0; b < B; ++b) acc += dy.data[static_cast<size_t>(b * O + o)];
    db.data[static_cast<size_t>(o)] = acc;
  }
  kernels::gemm_nn(B, F, O, dy.data.data(), w.data.data(), dx.data.data(), false);
}

template <class T>
void maxpool_forward(const TensorT<T>& x, const LayerSpec& l, int64_t ph, int64_t pw,
                     TensorT<T>& y, std::vector<int64_t>& argmax) {
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  argmax.assign(static_cast<size_t>(B * C * ph * pw), 0);
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t c = 0; c < C; ++c) {
      const T* plane = x.data.data() + (b * C + c) * H * W;
      T* out = y.data.data() + (b * C + c) * ph * pw;
      int64_t* am = argmax.data() + (b * C + c) * ph * pw;
      for (int64_t oy = 0; oy < ph; ++oy) {
        for (int64_t ox = 0; ox < pw; ++ox) {
          int64_t y0 = oy * l.pool_stride, x0 = ox * l.pool_stride;
          T best = plane[y0 * W + x0];
          int64_t best_idx = y0 * W + x0;
          for (int64_t ky = 0; ky < l.window; ++ky) {
            for (int64_t kx = 0; kx < l.window; ++kx) {
              int64_t idx = (y0 + ky) * W + (x0 + kx);
              if (plane[idx] > best) { // strict: ties keep the first in scan order
                best = plane[idx];
                best_idx = idx;
              }
            }
          }
          out[oy * pw + ox] = best;
          // store global flat index into x
          am[oy * pw + ox] = (b * C + c) * H * W + best_idx;
        }
      }
    }
  }
}

template <class T>
void lrn_forward(const TensorT<T>& x, const LayerSpec& l, TensorT<T>& y,
                 TensorT<T>& denom) {
  const int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  const int64_t r = (l.lrn_n - 1) / 2;
  const double an = l.lrn_alpha / l.lrn_n;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t s = 0; s < HW; ++s) {
      const T* xb = x.data.data() + b * C * HW;
      T* yb = y.data.data() + b * C * HW;
      T* db = denom.data.data() + b * C * HW;
      for (int64_t c = 0; c < C; ++c) {
        int64_t lo = std::max<int64_t>(0, c - r);
        int64_t hi = std::min<int64_t>(C - 1, c + r);
        double ss = 0.0;
        for (int64_t j = lo; j <= hi; ++j) {
          double a = static_cast<double>(xb[j * HW + s]);
          ss += a * a;
        }
        double d = l.lrn_k + an * ss;
        db[c * HW + s] = static_cast<T>(d);
        yb[c * HW + s] =
            static_cast<T>(static_cast<double>(xb[c * HW + s]) * std::pow(d, -l.lrn_beta));
      }
    }
  }
}

template <class T>
void lrn_backward(const TensorT<T>& x, const LayerSpec& l, const TensorT<T>& denom,
                  const TensorT<T>& dy, TensorT<T>& dx) {
  const int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  const int64_t r = (l.lrn_n - 1) / 2;
  const double an = l.lrn_alpha / l.lrn_n;
#pragma omp parallel for schedule(static) if (B > 1)
  for (int64_t b = 0; b < B; ++b) {
    const T* xb = x.data.data() + b * C * HW;
    const T* dyb = dy.data.data() + b * C * HW;
    const T* db = denom.data.data() + b * C * HW;
    T* dxb = dx.data.data() + b * C * HW;
    // t_j = g_j * a_j * d_j^(-beta-1); window symmetry lets each input
    // channel read the same window it contributed to.
    std::vector<double> t(static_cast<size_t>(C));
    for (int64_t s = 0; s < HW; ++s) {
      for (int64_t j = 0; j < C; ++j) {
        double d = static_cast<double>(db[j * HW + s]);
        t[static_cast<size_t>(j)] = static_cast<double>(dyb[j * HW + s]) *
                                    static_cast<double>(xb[j * HW + s]) *
                                    std::pow(d, -l.lrn_beta - 1.0);
      }
      for (int64_t c = 0; c < C; ++c) {
        int64_t lo = std::max<int64_t>(0, c - r);
        int64_t hi = std::min<int64_t>(C - 1, c + r);
        double acc = 0.0;
        for (int64_t j = lo; j <= hi; ++j) acc += t[static_cast<size_t>(j)];
        double d = static_cast<double>(db[c * HW + s]);
        double g = static_cast<double>(dyb[c * HW + s]) * std::pow(d, -l.lrn_beta) -
                   2.0 * l.lrn_beta * an * static_cast<double>(xb[c * HW + s]) * acc;
        dxb[c * HW + s] = static_cast<T>(g);
      }
    }
  }
}

template <class T>
std::vector<double> softmax_row(const T* logits, int64_t n) {
  double m = static_cast<double>(logits[0]);
  for (int64_t i = 1; i < n; ++i) m = std::max(m, static_cast<double>(logits[i]));
  std::vector<double> p(static_cast<size_t>(n));
  double se = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    p[static_cast<size_t>(i)] = std::exp(static_cast<double>(logits[i]) - m);
    se += p[static_cast<size_t>(i)];
  }
  for (double& v : p) v /= se;
  return p;
}

} // namespace

template <class T>
ForwardResult<T> forward(const NetworkSpec& spec, const WeightStoreT<T>& weights,
                         const TensorT<T>& input, const ForwardOptions& opt) {
  auto chain = spec.shape_chain();
  if (input.shape.size() != 4 || input.dim(1) != spec.in_channels ||
      input.dim(2) != spec.in_height || input.dim(3) != spec.in_width)
    throw ValidationError("forward: input shape " + shape_string(input.shape) +
                          " does not match network input " + shape_string({spec.in_channels,
                          spec.in_height, spec.in_width}));
  const int64_t B = input.dim(0);
  const size_t n = spec.layers.size();

  ForwardResult<T> res;
  res.train_mode = opt.train;
  res.acts.reserve(n + 1);
  res.acts.push_back(input);
  res.drop_mask.resize(n);
  res.pool_argmax.resize(n);
  res.lrn_denom.resize(n);

  Pcg32 drop_rng(mix_seed(opt.seed, rng_stream::kDropout), 0);

  for (size_t i = 0; i < n; ++i) {
    const LayerSpec& l = spec.layers[i];
    const TensorT<T>& x = res.acts.back();
    const LayerShape& os = chain[i + 1];
    TensorT<T> y;
    switch (l.kind) {
      case LayerKind::Conv: {
        const auto* e = weights.find(static_cast<int>(i));
        if (!e) throw ValidationError("forward: missing weights for layer " + std::to_string(i));
        y = TensorT<T>({B, os.c, os.h, os.w});
        conv_forward(x, e->weights, e->bias, l, os.h, os.w, y);
        break;
      }
      case LayerKind::Fc: {
        const auto* e = weights.find(static_cast<int>(i));
        if (!e) throw ValidationError("forward: missing weights for layer " + std::to_string(i));
        if (e->weights.dim(1) != x.size() / B)
          throw ValidationError("forward: fc weight shape mismatch at layer " +
                                std::to_string(i));
        y = TensorT<T>({B, os.c});
        fc_forward(x, e->weights, e->bias, y);
        break;
      }
      case LayerKind::Relu: {
        y = x;
        T* d = y.data.data();
        const int64_t sz = y.size();
#pragma omp parallel for schedule(static)
        for (int64_t j = 0; j < sz; ++j)
          if (d[j] < T(0)) d[j] = T(0);
        break;
      }
      case LayerKind::MaxPool: {
        y = TensorT<T>({B, os.c, os.h, os.w});
        maxpool_forward(x, l, os.h, os.w, y, res.pool_argmax[i]);
        break;
      }
      case LayerKind::Lrn: {
        y = TensorT<T>(x.shape);
        res.lrn_denom[i] = TensorT<T>(x.shape);
        lrn_forward(x, l, y, res.lrn_denom[i]);
        break;
      }
      case LayerKind::Dropout: {
        y = x;
        if (opt.train && l.rate > 0.0) {
          auto& mask = res.drop_mask[i];
          mask.resize(static_cast<size_t>(x.size()));
          // Mask draws are strictly sequential so the sampled noise is a
          // pure function of (seed, layer order, element order).
          for (size_t j = 0; j < mask.size(); ++j)
            mask[j] = drop_rng.next_double() >= l.rate ? 1 : 0;
          const T scale = static_cast<T>(1.0 / (1.0 - l.rate));
          T* d = y.data.data();
#pragma omp parallel for schedule(static)
          for (int64_t j = 0; j < y.size(); ++j)
            d[j] = mask[static_cast<size_t>(j)] ? d[j] * scale : T(0);
        }
        break;
      }
      case LayerKind::SoftmaxXent: {
        y = x; // logits pass through; the loss lives in backward()
        break;
      }
    }
    if (opt.checked && !y.all_finite())
      throw std::runtime_error("non-finite activation after layer " + std::to_string(i) +
                               " (" + layer_kind_name(l.kind) + ")");
    res.acts.push_back(std::move(y));
  }
  return res;
}

template ForwardResult<float> forward(const NetworkSpec&, const WeightStoreT<float>&,
                                      const TensorT<float>&, const ForwardOptions&);
template ForwardResult<double> forward(const NetworkSpec&, const WeightStoreT<double>&,
                                       const TensorT<double>&, const ForwardOptions&);

template <class T>
BackwardResult<T> backward(const NetworkSpec& spec, const WeightStoreT<T>& weights,
                           const ForwardResult<T>& cache, const std::vector<int>& labels) {
  auto chain = spec.shape_chain();
  const size_t n = spec.layers.size();
  if (cache.acts.size() != n + 1) throw ValidationError("backward: stale forward cache");
  const TensorT<T>& logits = cache.logits();
  const int64_t B = logits.dim(0);
  const int64_t K = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != B)
    throw ValidationError("backward: label count does not match batch");
  for (int lab : labels)
    if (lab < 0 || lab >= K)
      throw ValidationError("backward: label " + std::to_string(lab) + " outside 0.." +
                            std::to_string(K - 1));

  BackwardResult<T> res;
  res.gradients.stats = weights.stats;
  for (const auto& e : weights.entries) {
    typename WeightStoreT<T>::Entry g;
    g.layer = e.layer;
    g.weights = TensorT<T>(e.weights.shape);
    g.bias = TensorT<T>(e.bias.shape);
    res.gradients.entries.push_back(std::move(g));
  }

  // Loss and logit gradient from the softmax-xent head.
  TensorT<T> grad({B, K});
  double loss_sum = 0.0;
  for (int64_t b = 0; b < B; ++b) {
    const T* row = logits.data.data() + b * K;
    double m = static_cast<double>(row[0]);
    for (int64_t k = 1; k < K; ++k) m = std::max(m, static_cast<double>(row[k]));
    double se = 0.0;
    for (int64_t k = 0; k < K; ++k) se += std::exp(static_cast<double>(row[k]) - m);
    int64_t y = labels[static_cast<size_t>(b)];
    loss_sum += m + std::log(se) - static_cast<double>(row[y]);
    for (int64_t k = 0; k < K; ++k) {
      double p = std::exp(static_cast<double>(row[k]) - m) / se;
      grad.data[static_cast<size_t>(b * K + k)] =
          static_cast<T>((p - (k == y ? 1.0 : 0.0)) / static_cast<double>(B));
    }
  }
  res.loss = loss_sum / static_cast<double>(B);

  // Walk the layers in reverse; `grad` always holds dLoss/d(acts[i+1]).
  for (size_t ii = n - 1; ii-- > 0;) {
    const size_t i = ii;
    const LayerSpec& l = spec.layers[i];
    const TensorT<T>& x = cache.acts[i];
    const TensorT<T>& y = cache.acts[i + 1];
    (void)y;
    TensorT<T> dx;
    switch (l.kind) {
      case LayerKind::Conv: {
        auto* g = res.gradients.find(static_cast<int>(i));
        const auto* e = weights.find(static_cast<int>(i));
        dx = TensorT<T>(x.shape);
        conv_backward(x, e->weights, l, grad, chain[i + 1].h, chain[i + 1].w, g->weights,
                      g->bias, dx);
        break;
      }
      case LayerKind::Fc: {
        auto* g = res.gradients.find(static_cast<int>(i));
        const auto* e = weights.find(static_cast<int>(i));
        TensorT<T> dflat({B, x.size() / B});
        fc_backward(x, e->weights, grad, g->weights, g->bias, dflat);
        dx = std::move(dflat);
        dx.shape = x.shape;
        break;
      }
      case LayerKind::Relu: {
        dx = grad;
        const T* xd = x.data.data();
        T* d = dx.data.data();
#pragma omp parallel for schedule(static)
        for (int64_t j = 0; j < dx.size(); ++j)
          if (xd[j] <= T(0)) d[j] = T(0);
        break;
      }
      case LayerKind::MaxPool: {
        dx = TensorT<T>(x.shape);
        const auto& am = cache.pool_argmax[i];
        const int64_t C = x.dim(1);
        const int64_t plane_out = chain[i + 1].h * chain[i + 1].w;
#pragma omp parallel for collapse(2) schedule(static)
        for (int64_t b = 0; b < B; ++b) {
          for (int64_t c = 0; c < C; ++c) {
            const int64_t base = (b * C + c) * plane_out;
            for (int64_t s = 0; s < plane_out; ++s)
              dx.data[static_cast<size_t>(am[static_cast<size_t>(base + s)])] +=
                  grad.data[static_cast<size_t>(base + s)];
          }
        }
        break;
      }
      case LayerKind::Lrn: {
        dx = TensorT<T>(x.shape);
        lrn_backward(x, l, cache.lrn_denom[i], grad, dx);
        break;
      }
      case LayerKind::Dropout: {
        dx = grad;
        if (cache.train_mode && l.rate > 0.0) {
          const auto& mask = cache.drop_mask[i];
          const T scale = static_cast<T>(1.0 / (1.0 - l.rate));
          T* d = dx.data.data();
#pragma omp parallel for schedule(static)
          for (int64_t j = 0; j < dx.size(); ++j)
            d[j] = mask[static_cast<size_t>(j)] ? d[j] * scale : T(0);
        }
        break;
      }
      case LayerKind::SoftmaxXent:
        throw ValidationError("backward: softmax-xent must be the final layer");
    }
    grad = std::move(dx);
  }
  res.input_gradient = std::move(grad);
  return res;
}

template BackwardResult<float> backward(const NetworkSpec&, const WeightStoreT<float>&,
                                        const ForwardResult<float>&, const std::vector<int>&);
template BackwardResult<double> backward(const NetworkSpec&, const WeightStoreT<double>&,
                                         const ForwardResult<double>&,
                                         const std::vector<int>&);

Prediction predict(const NetworkSpec& spec, const WeightStore& weights, const Tensor& input) {
  return predict_batch(spec, weights, input).front();
}

std::vector<Prediction> predict_batch(const NetworkSpec& spec, const WeightStore& weights,
                                      const Tensor& input) {
  ForwardOptions opt;
  auto res = forward(spec, weights, input, opt);
  const Tensor& logits = res.logits();
  const int64_t B = logits.dim(0), K = logits.dim(1);
  std::vector<Prediction> out;
  out.reserve(static_cast<size_t>(B));
  for (int64_t b = 0; b < B; ++b) {
    Prediction p;
    p.probabilities = softmax_row(logits.data.data() + b * K, K);
    p.cls = 0;
    for (int64_t k = 1; k < K; ++k)
      if (p.probabilities[static_cast<size_t>(k)] >
          p.probabilities[static_cast<size_t>(p.cls)])
        p.cls = static_cast<int>(k);
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw FormatError("truncated weight file reading " + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_tensor(std::ostream& out, const Tensor& t) {
  put_u32(out, static_cast<uint32_t>(t.shape.size()));
  for (int64_t e : t.shape) put_u32(out, static_cast<uint32_t>(e));
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * 4));
}

Tensor get_tensor(std::istream& in, const std::string& what) {
  uint32_t rank = get_u32(in, what + " rank");
  if (rank == 0 || rank > 8) throw FormatError("bad tensor rank in weight file (" + what + ")");
  std::vector<int64_t> shape(rank);
  for (uint32_t i = 0; i < rank; ++i) {
    shape[i] = get_u32(in, what + " extent");
    if (shape[i] <= 0) throw FormatError("bad tensor extent in weight file (" + what + ")");
  }
  Tensor t(shape);
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * 4));
  if (static_cast<size_t>(in.gcount()) != t.data.size() * 4)
    throw FormatError("truncated weight file reading " + what + " payload");
  return t;
}

constexpr uint32_t kWeightFormatVersion = 1;

} // namespace

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("PSNN", 4);
  put_u32(out, kWeightFormatVersion);
  put_u32(out, static_cast<uint32_t>(store.entries.size()));
  for (const auto& e : store.entries) {
    put_u32(out, static_cast<uint32_t>(e.layer));
    put_tensor(out, e.weights);
    put_tensor(out, e.bias);
  }
  put_u32(out, 3);
  for (double m : store.stats.mean) {
    float f = static_cast<float>(m);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

WeightStore load_weights(const std::filesystem::path& path, const NetworkSpec* expect) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "PSNN", 4) != 0)
    throw FormatError("not a PSNN weight file: " + path.string());
  uint32_t version = get_u32(in, "version");
  if (version != kWeightFormatVersion)
    throw FormatError("unsupported PSNN version " + std::to_string(version));
  uint32_t count = get_u32(in, "entry count");
  WeightStore ws;
  for (uint32_t i = 0; i < count; ++i) {
    typename WeightStore::Entry e;
    e.layer = static_cast<int>(get_u32(in, "layer index"));
    e.weights = get_tensor(in, "layer " + std::to_string(e.layer) + " weights");
    e.bias = get_tensor(in, "layer " + std::to_string(e.layer) + " bias");
    ws.entries.push_back(std::move(e));
  }
  uint32_t stat_n = get_u32(in, "stats count");
  if (stat_n != 3) throw FormatError("expected 3 input-stat channels");
  for (size_t c = 0; c < 3; ++c) {
    uint32_t bits = get_u32(in, "stats value");
    float f;
    std::memcpy(&f, &bits, 4);
    ws.stats.mean[c] = static_cast<double>(f);
  }

  if (expect) {
    WeightStore ref = init_weights(*expect, 0);
    if (ref.entries.size() != ws.entries.size())
      throw ValidationError("weight file has " + std::to_string(ws.entries.size()) +
                            " parameterized layers, network expects " +
                            std::to_string(ref.entries.size()));
    for (size_t i = 0; i < ref.entries.size(); ++i) {
      const auto& want = ref.entries[i];
      const auto& got = ws.entries[i];
      if (want.layer != got.layer || want.weights.shape != got.weights.shape ||
          got.bias.shape != want.bias.shape)
        throw ValidationError("weight shape mismatch at layer " + std::to_string(want.layer) +
                              ": file has " + shape_string(got.weights.shape) +
                              ", network expects " + shape_string(want.weights.shape));
    }
  }
  return ws;
}

} // namespace plastisort
