#include "plastisort/optim.hpp"

#include <cmath>

#include "plastisort/rng.hpp"

namespace plastisort {

std::string solver_kind_name(SolverKind k) {
  switch (k) {
    case SolverKind::Adam: return "adam";
    case SolverKind::Sgdm: return "sgdm";
    case SolverKind::RmsProp: return "rmsprop";
  }
  return "?";
}

SolverKind solver_kind_from_string(const std::string& s) {
  if (s == "adam") return SolverKind::Adam;
  if (s == "sgdm") return SolverKind::Sgdm;
  if (s == "rmsprop") return SolverKind::RmsProp;
  throw ValidationError("unknown solver: " + s);
}

SolverConfig SolverConfig::defaults(SolverKind kind) {
  SolverConfig c;
  c.kind = kind;
  switch (kind) {
    case SolverKind::Adam:
      c.learning_rate = 1e-3;
      break;
    case SolverKind::Sgdm:
      c.learning_rate = 1e-2;
      break;
    case SolverKind::RmsProp:
      c.learning_rate = 1e-3;
      break;
  }
  return c;
}

void SolverConfig::validate() const {
  if (!(learning_rate > 0)) throw ValidationError("learning_rate must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw ValidationError("momentum must be in [0,1)");
  if (!(beta1 >= 0 && beta1 < 1)) throw ValidationError("beta1 must be in [0,1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ValidationError("beta2 must be in [0,1)");
  if (!(decay >= 0 && decay < 1)) throw ValidationError("decay must be in [0,1)");
  if (!(epsilon > 0)) throw ValidationError("epsilon must be > 0");
}

template <class T>
SolverStateT<T> make_solver_state(const WeightStoreT<T>& weights) {
  SolverStateT<T> st;
  for (const auto& e : weights.entries) {
    typename SolverStateT<T>::Entry s;
    s.w_m1 = TensorT<T>(e.weights.shape);
    s.w_m2 = TensorT<T>(e.weights.shape);
    s.b_m1 = TensorT<T>(e.bias.shape);
    s.b_m2 = TensorT<T>(e.bias.shape);
    st.entries.push_back(std::move(s));
  }
  return st;
}

template SolverStateT<float> make_solver_state(const WeightStoreT<float>&);
template SolverStateT<double> make_solver_state(const WeightStoreT<double>&);

namespace {

template <class T>
void step_span(const SolverConfig& cfg, int64_t t, T* w, T* m1, T* m2, const T* g,
               int64_t n) {
  const double lr = cfg.learning_rate;
  switch (cfg.kind) {
    case SolverKind::Sgdm: {
      const double mu = cfg.momentum;
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < n; ++i) {
        double v = mu * static_cast<double>(m1[i]) - lr * static_cast<double>(g[i]);
        m1[i] = static_cast<T>(v);
        w[i] = static_cast<T>(static_cast<double>(w[i]) + v);
      }
      break;
    }
    case SolverKind::Adam: {
      const double b1 = cfg.beta1, b2 = cfg.beta2, eps = cfg.epsilon;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < n; ++i) {
        double gi = static_cast<double>(g[i]);
        double m = b1 * static_cast<double>(m1[i]) + (1.0 - b1) * gi;
        double v = b2 * static_cast<double>(m2[i]) + (1.0 - b2) * gi * gi;
        m1[i] = static_cast<T>(m);
        m2[i] = static_cast<T>(v);
        double mhat = m / c1;
        double vhat = v / c2;
        w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * mhat / (std::sqrt(vhat) + eps));
      }
      break;
    }
    case SolverKind::RmsProp: {
      const double d = cfg.decay, eps = cfg.epsilon;
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < n; ++i) {
        double gi = static_cast<double>(g[i]);
        double s = d * static_cast<double>(m2[i]) + (1.0 - d) * gi * gi;
        m2[i] = static_cast<T>(s);
        w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * gi / (std::sqrt(s) + eps));
      }
      break;
    }
  }
}

} // namespace

template <class T>
void solver_step(const SolverConfig& cfg, SolverStateT<T>& state, WeightStoreT<T>& weights,
                 const WeightStoreT<T>& gradients, bool checked) {
  cfg.validate();
  if (state.entries.size() != weights.entries.size() ||
      gradients.entries.size() != weights.entries.size())
    throw ValidationError("solver_step: state/gradient entry count mismatch");
  state.step += 1;
  for (size_t i = 0; i < weights.entries.size(); ++i) {
    auto& w = weights.entries[i];
    const auto& g = gradients.entries[i];
    auto& s = state.entries[i];
    if (!g.weights.same_shape(w.weights) || !g.bias.same_shape(w.bias))
      throw ValidationError("solver_step: gradient shape mismatch at layer " +
                            std::to_string(w.layer));
    if (checked && (!g.weights.all_finite() || !g.bias.all_finite()))
      throw std::runtime_error("solver_step: non-finite gradient at layer " +
                               std::to_string(w.layer));
    step_span(cfg, state.step, w.weights.data.data(), s.w_m1.data.data(),
              s.w_m2.data.data(), g.weights.data.data(), w.weights.size());
    step_span(cfg, state.step, w.bias.data.data(), s.b_m1.data.data(), s.b_m2.data.data(),
              g.bias.data.data(), w.bias.size());
  }
}

template void solver_step(const SolverConfig&, SolverStateT<float>&, WeightStoreT<float>&,
                          const WeightStoreT<float>&, bool);
template void solver_step(const SolverConfig&, SolverStateT<double>&, WeightStoreT<double>&,
                          const WeightStoreT<double>&, bool);

std::string shuffle_policy_name(ShufflePolicy p) {
  switch (p) {
    case ShufflePolicy::Never: return "never";
    case ShufflePolicy::Once: return "once";
    case ShufflePolicy::EveryEpoch: return "every-epoch";
  }
  return "?";
}

ShufflePolicy shuffle_policy_from_string(const std::string& s) {
  if (s == "never") return ShufflePolicy::Never;
  if (s == "once") return ShufflePolicy::Once;
  if (s == "every-epoch") return ShufflePolicy::EveryEpoch;
  throw ValidationError("unknown shuffle policy: " + s);
}

std::vector<std::vector<int>> make_batches(int n, int batch_size, ShufflePolicy policy,
                                           uint64_t seed, int epoch) {
  if (n < 1) throw ValidationError("make_batches: n must be >= 1");
  if (batch_size < 1) throw ValidationError("make_batches: batch_size must be >= 1");
  std::vector<int> order = identity_permutation(n);
  if (policy == ShufflePolicy::Once) {
    Pcg32 rng(mix_seed(seed, rng_stream::kShuffle), 0);
    shuffle(order, rng);
  } else if (policy == ShufflePolicy::EveryEpoch) {
    Pcg32 rng(mix_seed(seed, rng_stream::kShuffle), 1 + static_cast<uint64_t>(epoch));
    shuffle(order, rng);
  }
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    int end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

} // namespace plastisort
