#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plastisort/net.hpp"

namespace plastisort {

enum class SolverKind { Adam, Sgdm, RmsProp };

std::string solver_kind_name(SolverKind k);
SolverKind solver_kind_from_string(const std::string& s);

struct SolverConfig {
  SolverKind kind = SolverKind::Adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // sgdm
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;   // adam
  double epsilon = 1e-8;  // adam, rmsprop
  double decay = 0.9;     // rmsprop

  // Default hyperparameters per solver, mirroring the usual framework
  // defaults: sgdm lr 0.01 / momentum 0.9; adam lr 0.001 / 0.9 / 0.999 /
  // 1e-8; rmsprop lr 0.001 / decay 0.9 / 1e-8.
  static SolverConfig defaults(SolverKind kind);
  void validate() const;
};

/// Per-parameter moment buffers. m1 holds velocity (sgdm) or the first
/// moment (adam); m2 holds the second moment (adam) or the running mean
/// square (rmsprop). Shapes mirror the weight store.
template <class T>
struct SolverStateT {
  struct Entry {
    TensorT<T> w_m1, w_m2, b_m1, b_m2;
  };
  std::vector<Entry> entries;
  int64_t step = 0;
};

using SolverState = SolverStateT<float>;

template <class T>
SolverStateT<T> make_solver_state(const WeightStoreT<T>& weights);

// One optimizer step, in place. Update rules:
//   sgdm:    v <- momentum*v - lr*g;            w <- w + v
//   adam:    m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2;
//            w <- w - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
//   rmsprop: s <- decay*s + (1-decay)*g^2;      w <- w - lr*g/(sqrt(s)+eps)
// The step counter increments once per call. Per-element arithmetic only,
// so the result is independent of iteration order and thread count.
template <class T>
void solver_step(const SolverConfig& cfg, SolverStateT<T>& state, WeightStoreT<T>& weights,
                 const WeightStoreT<T>& gradients, bool checked = false);

enum class ShufflePolicy { Never, Once, EveryEpoch };

std::string shuffle_policy_name(ShufflePolicy p);
ShufflePolicy shuffle_policy_from_string(const std::string& s);

// Splits indices 0..n-1 into consecutive batches (final short batch kept)
// after applying the shuffle policy: never = identity order; once = one
// seeded permutation reused for all epochs; every-epoch = a fresh
// permutation derived from (seed, epoch).
std::vector<std::vector<int>> make_batches(int n, int batch_size, ShufflePolicy policy,
                                           uint64_t seed, int epoch);

} // namespace plastisort
