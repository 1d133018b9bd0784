#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "ovclip/errors.hpp"
#include "ovclip/rng.hpp"

namespace ovclip {

// Dense n-d tensor over a scalar S (float for the 32-bit compute mode, double
// for the 64-bit one). Storage is a flat row-major Eigen vector; rank-2 views
// are exposed as Eigen maps so all heavy lifting stays inside Eigen
// expressions. Tensors of rank > 2 are treated as (numel/lastdim, lastdim)
// matrices by the rowwise operations.

template <typename S>
struct Tensor {
  using Storage = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  using MatView =
      Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatView = Eigen::Map<
      const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  std::vector<int> shape;
  Storage data;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shp) {
    Tensor t;
    t.shape = std::move(shp);
    t.data = Storage::Zero(check_shape(t.shape));
    return t;
  }

  static Tensor full(std::vector<int> shp, S v) {
    Tensor t;
    t.shape = std::move(shp);
    t.data = Storage::Constant(check_shape(t.shape), v);
    return t;
  }

  static Tensor scalar(S v) { return full({1}, v); }

  static Tensor from(std::vector<int> shp, std::initializer_list<S> vals) {
    Tensor t;
    t.shape = std::move(shp);
    Eigen::Index n = check_shape(t.shape);
    if (static_cast<std::size_t>(n) != vals.size())
      throw InvalidArgument("Tensor::from: value count does not match shape");
    t.data.resize(n);
    Eigen::Index i = 0;
    for (S v : vals) t.data[i++] = v;
    return t;
  }

  static Tensor randn(std::vector<int> shp, std::mt19937_64& eng, S stddev = S(1)) {
    Tensor t = zeros(std::move(shp));
    for (Eigen::Index i = 0; i < t.data.size(); ++i)
      t.data[i] = static_cast<S>(normal01(eng)) * stddev;
    return t;
  }

  static Eigen::Index check_shape(const std::vector<int>& shp) {
    if (shp.empty()) throw InvalidArgument("Tensor: empty shape");
    long long n = 1;
    for (int d : shp) {
      if (d <= 0) throw InvalidArgument("Tensor: non-positive dimension");
      n *= d;
    }
    return static_cast<Eigen::Index>(n);
  }

  Eigen::Index numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }

  // Rowwise view: last dimension is the column axis, everything else is rows.
  Eigen::Index cols() const { return shape.back(); }
  Eigen::Index rows() const { return numel() / cols(); }

  MatView mat() { return MatView(data.data(), rows(), cols()); }
  ConstMatView mat() const { return ConstMatView(data.data(), rows(), cols()); }

  S& at(Eigen::Index i) { return data[i]; }
  S at(Eigen::Index i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
      os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
  }

  template <typename T2>
  Tensor<T2> cast() const {
    Tensor<T2> o;
    o.shape = shape;
    o.data = data.template cast<T2>();
    return o;
  }
};

template <typename S>
bool all_finite(const Tensor<S>& t) {
  return t.data.allFinite();
}

template <typename S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  if (!a.same_shape(b))
    throw InvalidArgument("max_abs_diff: shape mismatch " + a.shape_str() +
                          " vs " + b.shape_str());
  if (a.numel() == 0) return 0.0;
  return (a.data.template cast<double>() - b.data.template cast<double>())
      .cwiseAbs()
      .maxCoeff();
}

// Sum/mean with 64-bit accumulation regardless of S, so reductions do not
// drift between the 32-bit and 64-bit modes more than rounding demands.
template <typename S>
double sum_f64(const Tensor<S>& t) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < t.data.size(); ++i)
    acc += static_cast<double>(t.data[i]);
  return acc;
}

template <typename S>
double mean_f64(const Tensor<S>& t) {
  if (t.numel() == 0) throw InvalidArgument("mean_f64: empty tensor");
  return sum_f64(t) / static_cast<double>(t.numel());
}

// Numerically stable softmax along the last dimension. Each row has its max
// subtracted before exponentiation; the normalizer accumulates in double.
template <typename S>
Tensor<S> softmax_lastdim(const Tensor<S>& x) {
  if (x.numel() == 0) throw InvalidArgument("softmax_lastdim: empty tensor");
  Tensor<S> y = Tensor<S>::zeros(x.shape);
  auto xm = x.mat();
  auto ym = y.mat();
  for (Eigen::Index r = 0; r < xm.rows(); ++r) {
    S m = xm.row(r).maxCoeff();
    if (!std::isfinite(static_cast<double>(m)))
      throw NumericError("softmax_lastdim: non-finite input");
    double denom = 0.0;
    for (Eigen::Index c = 0; c < xm.cols(); ++c) {
      double e = std::exp(static_cast<double>(xm(r, c)) - static_cast<double>(m));
      ym(r, c) = static_cast<S>(e);
      denom += e;
    }
    for (Eigen::Index c = 0; c < xm.cols(); ++c)
      ym(r, c) = static_cast<S>(static_cast<double>(ym(r, c)) / denom);
  }
  return y;
}

// Single-query scaled dot-product attention: softmax(q K^T / sqrt(d)) V.
// q is (m,d), keys (n,d), values (n,dv); n == 1 returns the value row exactly
// because the softmax over one logit is exactly one.
template <typename S>
Tensor<S> scaled_attention(const Tensor<S>& q, const Tensor<S>& k,
                           const Tensor<S>& v) {
  if (q.cols() != k.cols())
    throw InvalidArgument("scaled_attention: query/key width mismatch");
  if (k.rows() != v.rows())
    throw InvalidArgument("scaled_attention: key/value count mismatch");
  if (k.rows() == 0) throw InvalidArgument("scaled_attention: empty keys");
  Tensor<S> logits = Tensor<S>::zeros({static_cast<int>(q.rows()),
                                       static_cast<int>(k.rows())});
  S inv_sqrt_d = static_cast<S>(1.0 / std::sqrt(static_cast<double>(q.cols())));
  logits.mat().noalias() = q.mat() * k.mat().transpose() * inv_sqrt_d;
  Tensor<S> p = softmax_lastdim(logits);
  Tensor<S> out = Tensor<S>::zeros({static_cast<int>(q.rows()),
                                    static_cast<int>(v.cols())});
  out.mat().noalias() = p.mat() * v.mat();
  return out;
}

// Rows normalized to unit Euclidean length. A row with norm below `floor`
// cannot be normalized meaningfully and raises.
template <typename S>
Tensor<S> l2_normalized_rows(const Tensor<S>& x, double floor = 1e-12) {
  Tensor<S> y = Tensor<S>::zeros(x.shape);
  auto xm = x.mat();
  auto ym = y.mat();
  for (Eigen::Index r = 0; r < xm.rows(); ++r) {
    double n = std::sqrt(xm.row(r).template cast<double>().squaredNorm());
    if (!(n > floor))
      throw NumericError("l2_normalized_rows: row " + std::to_string(r) +
                         " has near-zero norm");
    ym.row(r) = (xm.row(r).template cast<double>() / n).template cast<S>();
  }
  return y;
}

}  // namespace ovclip
