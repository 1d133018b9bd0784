#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ovclip/tensor.hpp"

namespace ovclip {

// A checkpoint is an ordered map from parameter name to tensor plus free-form
// string metadata. Entries stay sorted by name, which fixes the iteration
// order everywhere (algebra, hashing, serialization) and makes "same
// architecture" a cheap structural comparison. Persisted checkpoints hold
// float32; the algebra is templated so weight-space identities can be verified
// in double precision, and the same container doubles as a gradient
// accumulator keyed by parameter name.

template <typename S>
struct BasicCheckpoint {
  std::vector<std::pair<std::string, Tensor<S>>> params;
  std::map<std::string, std::string> meta;

  void put(const std::string& name, Tensor<S> t) {
    auto it = std::lower_bound(
        params.begin(), params.end(), name,
        [](const auto& p, const std::string& n) { return p.first < n; });
    if (it != params.end() && it->first == name)
      it->second = std::move(t);
    else
      params.insert(it, {name, std::move(t)});
  }

  const Tensor<S>* find(const std::string& name) const {
    auto it = std::lower_bound(
        params.begin(), params.end(), name,
        [](const auto& p, const std::string& n) { return p.first < n; });
    if (it == params.end() || it->first != name) return nullptr;
    return &it->second;
  }

  Tensor<S>* find(const std::string& name) {
    return const_cast<Tensor<S>*>(
        static_cast<const BasicCheckpoint*>(this)->find(name));
  }

  const Tensor<S>& at(const std::string& name) const {
    const Tensor<S>* t = find(name);
    if (!t) throw InvalidArgument("checkpoint: no parameter named " + name);
    return *t;
  }

  std::size_t size() const { return params.size(); }

  bool same_structure(const BasicCheckpoint& o) const {
    if (params.size() != o.params.size()) return false;
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].first != o.params[i].first ||
          params[i].second.shape != o.params[i].second.shape)
        return false;
    return true;
  }

  template <typename T2>
  BasicCheckpoint<T2> cast() const {
    BasicCheckpoint<T2> o;
    o.meta = meta;
    o.params.reserve(params.size());
    for (const auto& [k, v] : params)
      o.params.emplace_back(k, v.template cast<T2>());
    return o;
  }
};

using Checkpoint = BasicCheckpoint<float>;

template <typename S>
void check_same_structure(const BasicCheckpoint<S>& a,
                          const BasicCheckpoint<S>& b, const char* who) {
  if (!a.same_structure(b))
    throw InvalidArgument(std::string(who) +
                          ": checkpoints have different parameter sets");
}

// Elementwise lam*a + (1-lam)*b, the straight line between two checkpoints in
// weight space. The blend runs in double before rounding back to S, so
// lam==1 returns a's values bit-exactly and lam==0 returns b's.
template <typename S>
BasicCheckpoint<S> interpolate(const BasicCheckpoint<S>& a,
                               const BasicCheckpoint<S>& b, double lam) {
  if (!(lam >= 0.0 && lam <= 1.0))
    throw InvalidArgument("interpolate: lam must lie in [0,1], got " +
                          std::to_string(lam));
  check_same_structure(a, b, "interpolate");
  BasicCheckpoint<S> out;
  out.params.reserve(a.params.size());
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    const Tensor<S>& ta = a.params[i].second;
    const Tensor<S>& tb = b.params[i].second;
    Tensor<S> t = Tensor<S>::zeros(ta.shape);
    for (Eigen::Index j = 0; j < t.numel(); ++j)
      t.data[j] = static_cast<S>(lam * static_cast<double>(ta.data[j]) +
                                 (1.0 - lam) * static_cast<double>(tb.data[j]));
    out.params.emplace_back(a.params[i].first, std::move(t));
  }
  return out;
}

// Arithmetic mean of N checkpoints, accumulated in double per element.
template <typename S>
BasicCheckpoint<S> checkpoint_mean(const std::vector<BasicCheckpoint<S>>& cs) {
  if (cs.empty()) throw InvalidArgument("checkpoint_mean: empty list");
  for (std::size_t i = 1; i < cs.size(); ++i)
    check_same_structure(cs[0], cs[i], "checkpoint_mean");
  BasicCheckpoint<S> out;
  out.params.reserve(cs[0].params.size());
  double inv = 1.0 / static_cast<double>(cs.size());
  for (std::size_t p = 0; p < cs[0].params.size(); ++p) {
    Tensor<S> t = Tensor<S>::zeros(cs[0].params[p].second.shape);
    for (Eigen::Index j = 0; j < t.numel(); ++j) {
      double acc = 0.0;
      for (const auto& c : cs) acc += static_cast<double>(c.params[p].second.data[j]);
      t.data[j] = static_cast<S>(acc * inv);
    }
    out.params.emplace_back(cs[0].params[p].first, std::move(t));
  }
  return out;
}

// target += c * src, in place. Gradient accumulation and SGD steps.
template <typename S>
void add_scaled(BasicCheckpoint<S>& target, const BasicCheckpoint<S>& src,
                double c) {
  check_same_structure(target, src, "add_scaled");
  for (std::size_t i = 0; i < target.params.size(); ++i)
    target.params[i].second.data += src.params[i].second.data * static_cast<S>(c);
}

template <typename S>
BasicCheckpoint<S> zeros_like(const BasicCheckpoint<S>& a) {
  BasicCheckpoint<S> out;
  out.params.reserve(a.params.size());
  for (const auto& [k, v] : a.params)
    out.params.emplace_back(k, Tensor<S>::zeros(v.shape));
  return out;
}

template <typename S>
bool all_finite(const BasicCheckpoint<S>& c) {
  for (const auto& [k, v] : c.params)
    if (!all_finite(v)) return false;
  return true;
}

template <typename S>
double max_abs_diff(const BasicCheckpoint<S>& a, const BasicCheckpoint<S>& b) {
  check_same_structure(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    worst = std::max(worst, max_abs_diff(a.params[i].second, b.params[i].second));
  return worst;
}

// Order-sensitive digest of names, shapes and payload bytes. Metadata is
// excluded on purpose: two checkpoints with identical weights hash the same
// even if their provenance notes differ.
template <typename S>
std::uint64_t content_hash(const BasicCheckpoint<S>& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : c.params) {
    h = fnv1a64(name, h);
    for (int d : t.shape) h = fnv1a64(&d, sizeof(d), h);
    h = fnv1a64(t.data.data(), sizeof(S) * static_cast<std::size_t>(t.numel()), h);
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

}  // namespace ovclip
