#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ovclip/tensor.hpp"

namespace ovclip {

// Reverse-mode autodiff on an eagerly evaluated tape, templated on the scalar
// S. Nodes are created by op methods that compute the value immediately and
// register a backward closure; backward() replays closures in reverse creation
// order, restricted to nodes that can actually reach the loss. Gradients of
// leaves never touched by the loss stay exactly zero.
//
// Numeric conventions shared with the plain tensor kernels: softmax and
// log-sum-exp subtract the row max and accumulate normalizers in double;
// reductions accumulate in double before rounding back to S.

template <typename S>
class Graph {
 public:
  struct Ref {
    int i = -1;
  };

  struct AttnBlock {
    int q0, qn;  // query row range
    int k0, kn;  // key/value row range
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Ref leaf(Tensor<S> v) {
    if (!all_finite(v)) throw NumericError("leaf: non-finite input tensor");
    return push(std::move(v), {}, nullptr);
  }

  const Tensor<S>& val(Ref r) const { return node(r).val; }
  const Tensor<S>& grad(Ref r) const { return node(r).grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // ---- elementwise and linear ops ----

  Ref add(Ref a, Ref b) {
    check_same_shape("add", a, b);
    Tensor<S> out = val(a);
    out.data += val(b).data;
    return push(std::move(out), {a.i, b.i}, [this, a, b](const Node& n) {
      nodes_[a.i].grad.data += n.grad.data;
      nodes_[b.i].grad.data += n.grad.data;
    });
  }

  Ref sub(Ref a, Ref b) {
    check_same_shape("sub", a, b);
    Tensor<S> out = val(a);
    out.data -= val(b).data;
    return push(std::move(out), {a.i, b.i}, [this, a, b](const Node& n) {
      nodes_[a.i].grad.data += n.grad.data;
      nodes_[b.i].grad.data -= n.grad.data;
    });
  }

  Ref mul(Ref a, Ref b) {
    check_same_shape("mul", a, b);
    Tensor<S> out = val(a);
    out.data.array() *= val(b).data.array();
    return push(std::move(out), {a.i, b.i}, [this, a, b](const Node& n) {
      nodes_[a.i].grad.data.array() +=
          n.grad.data.array() * nodes_[b.i].val.data.array();
      nodes_[b.i].grad.data.array() +=
          n.grad.data.array() * nodes_[a.i].val.data.array();
    });
  }

  Ref scale(Ref a, double c) {
    Tensor<S> out = val(a);
    out.data *= static_cast<S>(c);
    return push(std::move(out), {a.i}, [this, a, c](const Node& n) {
      nodes_[a.i].grad.data += n.grad.data * static_cast<S>(c);
    });
  }

  // y = x * s where s is a scalar node (shape [1]).
  Ref scale_by(Ref x, Ref s) {
    if (val(s).numel() != 1)
      throw InvalidArgument("scale_by: scale must be a scalar node");
    S sv = val(s).data[0];
    Tensor<S> out = val(x);
    out.data *= sv;
    return push(std::move(out), {x.i, s.i}, [this, x, s, sv](const Node& n) {
      nodes_[x.i].grad.data += n.grad.data * sv;
      double acc = 0.0;
      const auto& xv = nodes_[x.i].val.data;
      for (Eigen::Index i = 0; i < xv.size(); ++i)
        acc += static_cast<double>(n.grad.data[i]) * static_cast<double>(xv[i]);
      nodes_[s.i].grad.data[0] += static_cast<S>(acc);
    });
  }

  Ref clamp(Ref x, double lo, double hi) {
    if (!(lo <= hi)) throw InvalidArgument("clamp: lo > hi");
    Tensor<S> out = val(x);
    out.data = out.data.cwiseMax(static_cast<S>(lo)).cwiseMin(static_cast<S>(hi));
    return push(std::move(out), {x.i}, [this, x, lo, hi](const Node& n) {
      const auto& xv = nodes_[x.i].val.data;
      auto& gx = nodes_[x.i].grad.data;
      for (Eigen::Index i = 0; i < xv.size(); ++i) {
        double v = static_cast<double>(xv[i]);
        if (v >= lo && v <= hi) gx[i] += n.grad.data[i];
      }
    });
  }

  Ref gelu(Ref x) {
    Tensor<S> out = val(x);
    for (Eigen::Index i = 0; i < out.data.size(); ++i) {
      double v = static_cast<double>(out.data[i]);
      out.data[i] = static_cast<S>(0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)));
    }
    return push(std::move(out), {x.i}, [this, x](const Node& n) {
      const auto& xv = nodes_[x.i].val.data;
      auto& gx = nodes_[x.i].grad.data;
      for (Eigen::Index i = 0; i < xv.size(); ++i) {
        double v = static_cast<double>(xv[i]);
        double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
        double pdf = std::exp(-0.5 * v * v) * 0.3989422804014327;
        gx[i] += n.grad.data[i] * static_cast<S>(cdf + v * pdf);
      }
    });
  }

  Ref matmul(Ref a, Ref b) {
    const Tensor<S>&av = val(a), &bv = val(b);
    if (av.cols() != bv.rows())
      throw InvalidArgument("matmul: inner dims " + av.shape_str() + " x " +
                            bv.shape_str());
    Tensor<S> out = Tensor<S>::zeros(
        {static_cast<int>(av.rows()), static_cast<int>(bv.cols())});
    out.mat().noalias() = av.mat() * bv.mat();
    return push(std::move(out), {a.i, b.i}, [this, a, b](const Node& n) {
      nodes_[a.i].grad.mat().noalias() +=
          n.grad.mat() * nodes_[b.i].val.mat().transpose();
      nodes_[b.i].grad.mat().noalias() +=
          nodes_[a.i].val.mat().transpose() * n.grad.mat();
    });
  }

  // a (m,k) times b^T where b is (n,k): out (m,n).
  Ref matmul_nt(Ref a, Ref b) {
    const Tensor<S>&av = val(a), &bv = val(b);
    if (av.cols() != bv.cols())
      throw InvalidArgument("matmul_nt: width mismatch " + av.shape_str() +
                            " vs " + bv.shape_str());
    Tensor<S> out = Tensor<S>::zeros(
        {static_cast<int>(av.rows()), static_cast<int>(bv.rows())});
    out.mat().noalias() = av.mat() * bv.mat().transpose();
    return push(std::move(out), {a.i, b.i}, [this, a, b](const Node& n) {
      nodes_[a.i].grad.mat().noalias() += n.grad.mat() * nodes_[b.i].val.mat();
      nodes_[b.i].grad.mat().noalias() +=
          n.grad.mat().transpose() * nodes_[a.i].val.mat();
    });
  }

  Ref transpose(Ref a) {
    const Tensor<S>& av = val(a);
    Tensor<S> out = Tensor<S>::zeros(
        {static_cast<int>(av.cols()), static_cast<int>(av.rows())});
    out.mat() = av.mat().transpose();
    return push(std::move(out), {a.i}, [this, a](const Node& n) {
      nodes_[a.i].grad.mat() += n.grad.mat().transpose();
    });
  }

  // y = x + broadcast row b; x (n,d), b shape {d}.
  Ref add_rowvec(Ref x, Ref b) {
    const Tensor<S>&xv = val(x), &bv = val(b);
    if (bv.numel() != xv.cols())
      throw InvalidArgument("add_rowvec: bias width mismatch");
    Tensor<S> out = xv;
    out.mat().rowwise() += bv.data.transpose();
    return push(std::move(out), {x.i, b.i}, [this, x, b](const Node& n) {
      nodes_[x.i].grad.data += n.grad.data;
      auto gm = n.grad.mat();
      auto& gb = nodes_[b.i].grad.data;
      for (Eigen::Index c = 0; c < gm.cols(); ++c) {
        double acc = 0.0;
        for (Eigen::Index r = 0; r < gm.rows(); ++r)
          acc += static_cast<double>(gm(r, c));
        gb[c] += static_cast<S>(acc);
      }
    });
  }

  // out rows are table rows selected by ids; backward scatter-adds.
  Ref gather_rows(Ref table, std::vector<int> ids) {
    const Tensor<S>& tv = val(table);
    if (ids.empty()) throw InvalidArgument("gather_rows: empty id list");
    for (int id : ids)
      if (id < 0 || id >= tv.rows())
        throw InvalidArgument("gather_rows: id " + std::to_string(id) +
                              " out of range for " + tv.shape_str());
    Tensor<S> out = Tensor<S>::zeros(
        {static_cast<int>(ids.size()), static_cast<int>(tv.cols())});
    auto om = out.mat();
    auto tm = tv.mat();
    for (std::size_t r = 0; r < ids.size(); ++r) om.row(r) = tm.row(ids[r]);
    auto ids_p = std::make_shared<std::vector<int>>(std::move(ids));
    return push(std::move(out), {table.i}, [this, table, ids_p](const Node& n) {
      auto gt = nodes_[table.i].grad.mat();
      auto gm = n.grad.mat();
      for (std::size_t r = 0; r < ids_p->size(); ++r)
        gt.row((*ids_p)[r]) += gm.row(r);
    });
  }

  // ---- rowwise nonlinear ops ----

  Ref softmax_lastdim(Ref x) {
    Tensor<S> out = ovclip::softmax_lastdim(val(x));
    return push(std::move(out), {x.i}, [this, x](const Node& n) {
      auto pm = n.val.mat();
      auto gm = n.grad.mat();
      auto gx = nodes_[x.i].grad.mat();
      for (Eigen::Index r = 0; r < pm.rows(); ++r) {
        double dot = 0.0;
        for (Eigen::Index c = 0; c < pm.cols(); ++c)
          dot += static_cast<double>(gm(r, c)) * static_cast<double>(pm(r, c));
        for (Eigen::Index c = 0; c < pm.cols(); ++c)
          gx(r, c) += static_cast<S>(
              static_cast<double>(pm(r, c)) *
              (static_cast<double>(gm(r, c)) - dot));
      }
    });
  }

  // Rowwise layer norm with learned gain g {d} and bias b {d}.
  Ref layernorm(Ref x, Ref g, Ref b, double eps = 1e-5) {
    const Tensor<S>& xv = val(x);
    const Tensor<S>&gv = val(g), &bv = val(b);
    if (gv.numel() != xv.cols() || bv.numel() != xv.cols())
      throw InvalidArgument("layernorm: gain/bias width mismatch");
    Eigen::Index nr = xv.rows(), nc = xv.cols();
    auto xhat = std::make_shared<Eigen::MatrixXd>(nr, nc);
    auto inv = std::make_shared<Eigen::VectorXd>(nr);
    Tensor<S> out = Tensor<S>::zeros(xv.shape);
    auto xm = xv.mat();
    auto om = out.mat();
    for (Eigen::Index r = 0; r < nr; ++r) {
      double mu = 0.0;
      for (Eigen::Index c = 0; c < nc; ++c) mu += static_cast<double>(xm(r, c));
      mu /= static_cast<double>(nc);
      double var = 0.0;
      for (Eigen::Index c = 0; c < nc; ++c) {
        double d = static_cast<double>(xm(r, c)) - mu;
        var += d * d;
      }
      var /= static_cast<double>(nc);
      double iv = 1.0 / std::sqrt(var + eps);
      (*inv)[r] = iv;
      for (Eigen::Index c = 0; c < nc; ++c) {
        double xh = (static_cast<double>(xm(r, c)) - mu) * iv;
        (*xhat)(r, c) = xh;
        om(r, c) = static_cast<S>(xh * static_cast<double>(gv.data[c]) +
                                  static_cast<double>(bv.data[c]));
      }
    }
    return push(std::move(out), {x.i, g.i, b.i},
                [this, x, g, b, xhat, inv](const Node& n) {
      auto gm = n.grad.mat();
      auto gx = nodes_[x.i].grad.mat();
      auto& gg = nodes_[g.i].grad.data;
      auto& gb = nodes_[b.i].grad.data;
      const auto& gv = nodes_[g.i].val.data;
      Eigen::Index nr = gm.rows(), nc = gm.cols();
      for (Eigen::Index r = 0; r < nr; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (Eigen::Index c = 0; c < nc; ++c) {
          double dxh = static_cast<double>(gm(r, c)) * static_cast<double>(gv[c]);
          m1 += dxh;
          m2 += dxh * (*xhat)(r, c);
        }
        m1 /= static_cast<double>(nc);
        m2 /= static_cast<double>(nc);
        for (Eigen::Index c = 0; c < nc; ++c) {
          double dy = static_cast<double>(gm(r, c));
          double dxh = dy * static_cast<double>(gv[c]);
          gx(r, c) += static_cast<S>((dxh - m1 - (*xhat)(r, c) * m2) * (*inv)[r]);
          gg[c] += static_cast<S>(dy * (*xhat)(r, c));
          gb[c] += static_cast<S>(dy);
        }
      }
    });
  }

  // out row g = mean of x rows [starts[g], starts[g]+lens[g]).
  Ref group_mean_rows(Ref x, std::vector<int> starts, std::vector<int> lens) {
    const Tensor<S>& xv = val(x);
    if (starts.size() != lens.size() || starts.empty())
      throw InvalidArgument("group_mean_rows: bad group spec");
    for (std::size_t g = 0; g < starts.size(); ++g)
      if (lens[g] <= 0 || starts[g] < 0 || starts[g] + lens[g] > xv.rows())
        throw InvalidArgument("group_mean_rows: group out of range");
    Tensor<S> out = Tensor<S>::zeros(
        {static_cast<int>(starts.size()), static_cast<int>(xv.cols())});
    auto om = out.mat();
    auto xm = xv.mat();
    for (std::size_t g = 0; g < starts.size(); ++g) {
      for (Eigen::Index c = 0; c < xm.cols(); ++c) {
        double acc = 0.0;
        for (int r = 0; r < lens[g]; ++r)
          acc += static_cast<double>(xm(starts[g] + r, c));
        om(g, c) = static_cast<S>(acc / lens[g]);
      }
    }
    auto sp = std::make_shared<std::vector<int>>(std::move(starts));
    auto lp = std::make_shared<std::vector<int>>(std::move(lens));
    return push(std::move(out), {x.i}, [this, x, sp, lp](const Node& n) {
      auto gm = n.grad.mat();
      auto gx = nodes_[x.i].grad.mat();
      for (std::size_t g = 0; g < sp->size(); ++g) {
        S inv = static_cast<S>(1.0 / (*lp)[g]);
        for (int r = 0; r < (*lp)[g]; ++r)
          gx.row((*sp)[g] + r) += gm.row(g) * inv;
      }
    });
  }

  Ref l2norm_rows(Ref x) {
    const Tensor<S>& xv = val(x);
    Eigen::Index nr = xv.rows();
    auto norms = std::make_shared<Eigen::VectorXd>(nr);
    Tensor<S> out = Tensor<S>::zeros(xv.shape);
    auto xm = xv.mat();
    auto om = out.mat();
    for (Eigen::Index r = 0; r < nr; ++r) {
      double nrm = std::sqrt(xm.row(r).template cast<double>().squaredNorm());
      if (!(nrm > 1e-12))
        throw NumericError("l2norm_rows: row " + std::to_string(r) +
                           " has near-zero norm");
    (*norms)[r] = nrm;
      om.row(r) = (xm.row(r).template cast<double>() / nrm).template cast<S>();
    }
    return push(std::move(out), {x.i}, [this, x, norms](const Node& n) {
      auto ym = n.val.mat();
      auto gm = n.grad.mat();
      auto gx = nodes_[x.i].grad.mat();
      for (Eigen::Index r = 0; r < ym.rows(); ++r) {
        double dot = 0.0;
        for (Eigen::Index c = 0; c < ym.cols(); ++c)
          dot += static_cast<double>(gm(r, c)) * static_cast<double>(ym(r, c));
        for (Eigen::Index c = 0; c < ym.cols(); ++c)
          gx(r, c) += static_cast<S>(
              (static_cast<double>(gm(r, c)) -
               static_cast<double>(ym(r, c)) * dot) /
              (*norms)[r]);
      }
    });
  }

  // ---- attention ----

  // Multi-head scaled dot-product attention over explicit (query rows, key
  // rows) blocks of shared Q/K/V matrices. One op covers frame-local and
  // temporally expanded attention (one block per frame whose key range spans
  // the frame window) as well as per-sample full attention over ragged text
  // (one block per sample; padding rows simply appear in no block).
  Ref block_attention(Ref q, Ref k, Ref v, std::vector<AttnBlock> blocks,
                      int heads) {
    const Tensor<S>&qv = val(q), &kv = val(k), &vv = val(v);
    if (heads <= 0) throw InvalidArgument("block_attention: heads must be positive");
    if (qv.cols() != kv.cols())
      throw InvalidArgument("block_attention: query/key width mismatch");
    if (kv.rows() != vv.rows())
      throw InvalidArgument("block_attention: key/value count mismatch");
    if (qv.cols() % heads != 0 || vv.cols() % heads != 0)
      throw InvalidArgument("block_attention: width not divisible by heads");
    for (const AttnBlock& b : blocks) {
      if (b.qn <= 0 || b.kn <= 0 || b.q0 < 0 || b.k0 < 0 ||
          b.q0 + b.qn > qv.rows() || b.k0 + b.kn > kv.rows())
        throw InvalidArgument("block_attention: block out of range");
    }
    int hd = static_cast<int>(qv.cols()) / heads;
    int hdv = static_cast<int>(vv.cols()) / heads;
    S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(hd)));
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    auto probs = std::make_shared<std::vector<Mat>>();
    probs->reserve(blocks.size() * heads);
    Tensor<S> out = Tensor<S>::zeros(
        {static_cast<int>(qv.rows()), static_cast<int>(vv.cols())});
    auto qm = qv.mat();
    auto km = kv.mat();
    auto vm = vv.mat();
    auto om = out.mat();
    for (const AttnBlock& b : blocks) {
      for (int h = 0; h < heads; ++h) {
        Mat logits = qm.block(b.q0, h * hd, b.qn, hd) *
                     km.block(b.k0, h * hd, b.kn, hd).transpose() * inv_sqrt;
        // stable softmax rows, normalizer in double
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
          S mx = logits.row(r).maxCoeff();
          double denom = 0.0;
          for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            double e = std::exp(static_cast<double>(logits(r, c)) -
                                static_cast<double>(mx));
            logits(r, c) = static_cast<S>(e);
            denom += e;
          }
          for (Eigen::Index c = 0; c < logits.cols(); ++c)
            logits(r, c) =
                static_cast<S>(static_cast<double>(logits(r, c)) / denom);
        }
        om.block(b.q0, h * hdv, b.qn, hdv).noalias() +=
            logits * vm.block(b.k0, h * hdv, b.kn, hdv);
        probs->push_back(std::move(logits));
      }
    }
    auto bp = std::make_shared<std::vector<AttnBlock>>(std::move(blocks));
    return push(std::move(out), {q.i, k.i, v.i},
                [this, q, k, v, bp, probs, heads, hd, hdv, inv_sqrt](const Node& n) {
      auto qm = nodes_[q.i].val.mat();
      auto km = nodes_[k.i].val.mat();
      auto vm = nodes_[v.i].val.mat();
      auto gq = nodes_[q.i].grad.mat();
      auto gk = nodes_[k.i].grad.mat();
      auto gv = nodes_[v.i].grad.mat();
      auto go = n.grad.mat();
      std::size_t pi = 0;
      for (const AttnBlock& b : *bp) {
        for (int h = 0; h < heads; ++h, ++pi) {
          const Mat& p = (*probs)[pi];
          Mat dout = go.block(b.q0, h * hdv, b.qn, hdv);
          Mat dp = dout * vm.block(b.k0, h * hdv, b.kn, hdv).transpose();
          gv.block(b.k0, h * hdv, b.kn, hdv).noalias() += p.transpose() * dout;
          // softmax backward per row
          Mat dl(p.rows(), p.cols());
          for (Eigen::Index r = 0; r < p.rows(); ++r) {
            double dot = 0.0;
            for (Eigen::Index c = 0; c < p.cols(); ++c)
              dot += static_cast<double>(dp(r, c)) * static_cast<double>(p(r, c));
            for (Eigen::Index c = 0; c < p.cols(); ++c)
              dl(r, c) = static_cast<S>(
                  static_cast<double>(p(r, c)) *
                  (static_cast<double>(dp(r, c)) - dot));
          }
          gq.block(b.q0, h * hd, b.qn, hd).noalias() +=
              dl * km.block(b.k0, h * hd, b.kn, hd) * inv_sqrt;
          gk.block(b.k0, h * hd, b.kn, hd).noalias() +=
              dl.transpose() * qm.block(b.q0, h * hd, b.qn, hd) * inv_sqrt;
        }
      }
    });
  }

  // Plain softmax(q K^T / sqrt(d)) V as a single-block, single-head case.
  Ref attend(Ref q, Ref k, Ref v) {
    const Tensor<S>&qv = val(q), &kv = val(k);
    return block_attention(
        q, k, v,
        {AttnBlock{0, static_cast<int>(qv.rows()), 0, static_cast<int>(kv.rows())}},
        1);
  }

  // ---- reductions and losses ----

  Ref sum_all(Ref x) {
    Tensor<S> out = Tensor<S>::scalar(static_cast<S>(sum_f64(val(x))));
    return push(std::move(out), {x.i}, [this, x](const Node& n) {
      nodes_[x.i].grad.data.array() += n.grad.data[0];
    });
  }

  Ref mean_all(Ref x) { return scale(sum_all(x), 1.0 / val(x).numel()); }

  // Cross entropy of softmax rows against the diagonal: for square logits L,
  // mean_i of -log softmax(L_i)[i]. The backbone of the symmetric contrastive
  // objective; the other direction is xent_diag(transpose(L)).
  Ref xent_diag(Ref logits) {
    const Tensor<S>& lv = val(logits);
    if (lv.rank() != 2 || lv.rows() != lv.cols())
      throw InvalidArgument("xent_diag: logits must be square, got " +
                            lv.shape_str());
    Eigen::Index n = lv.rows();
    Tensor<S> p = ovclip::softmax_lastdim(lv);
    auto pm_store = std::make_shared<Tensor<S>>(std::move(p));
    auto lm = lv.mat();
    double loss = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      S mx = lm.row(r).maxCoeff();
      double denom = 0.0;
      for (Eigen::Index c = 0; c < n; ++c)
        denom += std::exp(static_cast<double>(lm(r, c)) - static_cast<double>(mx));
      double lse = static_cast<double>(mx) + std::log(denom);
      loss += lse - static_cast<double>(lm(r, r));
    }
    loss /= static_cast<double>(n);
    Tensor<S> out = Tensor<S>::scalar(static_cast<S>(loss));
    return push(std::move(out), {logits.i},
                [this, logits, pm_store, n](const Node& nd) {
      S g = nd.grad.data[0];
      auto gl = nodes_[logits.i].grad.mat();
      auto pm = pm_store->mat();
      S invn = static_cast<S>(1.0 / static_cast<double>(n));
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
          gl(r, c) += g * invn * (pm(r, c) - (r == c ? S(1) : S(0)));
    });
  }

  // ---- engine ----

  void backward(Ref loss) {
    if (loss.i < 0 || loss.i >= size())
      throw InvalidArgument("backward: bad loss ref");
    if (node(loss).val.numel() != 1)
      throw InvalidArgument("backward: loss must be scalar, got " +
                            node(loss).val.shape_str());
    if (!all_finite(node(loss).val))
      throw NumericError("backward: loss is not finite");
    // mark nodes that the loss depends on
    std::vector<char> reach(nodes_.size(), 0);
    std::vector<int> stack{loss.i};
    reach[loss.i] = 1;
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      for (int p : nodes_[i].parents)
        if (!reach[p]) {
          reach[p] = 1;
          stack.push_back(p);
        }
    }
    nodes_[loss.i].grad.data[0] += S(1);
    for (int i = loss.i; i >= 0; --i)
      if (reach[i] && nodes_[i].back) nodes_[i].back(nodes_[i]);
  }

  void reset_grads() {
    for (auto& n : nodes_) n.grad.data.setZero();
  }

 private:
  struct Node {
    Tensor<S> val;
    Tensor<S> grad;
    std::vector<int> parents;
    std::function<void(const Node&)> back;
  };
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  const Node& node(Ref r) const {
    if (r.i < 0 || r.i >= size()) throw InvalidArgument("graph: bad node ref");
    return nodes_[r.i];
  }

  Ref push(Tensor<S> v, std::vector<int> parents,
           std::function<void(const Node&)> back) {
    Node n;
    n.grad = Tensor<S>::zeros(v.shape);
    n.val = std::move(v);
    n.parents = std::move(parents);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Ref{static_cast<int>(nodes_.size()) - 1};
  }

  void check_same_shape(const char* op, Ref a, Ref b) const {
    if (!val(a).same_shape(val(b)))
      throw InvalidArgument(std::string(op) + ": shape mismatch " +
                            val(a).shape_str() + " vs " + val(b).shape_str());
  }

  std::vector<Node> nodes_;
};

// Temporal attention windows must be odd so a frame's window is centered on
// it; 1 means frame-local attention.
inline void check_window(int window) {
  if (window < 1 || window % 2 == 0)
    throw InvalidArgument("window must be a positive odd integer, got " +
                          std::to_string(window));
}

// ---- finite-difference oracle helpers ----

// Central difference of a scalar function of one double. Used to validate
// analytic gradients against an estimate that shares no code with the tape.
template <typename F>
double central_diff(F&& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Relative error between analytic and finite-difference gradients, normalized
// by the larger magnitude present in either so tiny tensors do not produce
// spurious huge ratios.
inline double grad_relative_error(const std::vector<double>& analytic,
                                  const std::vector<double>& numeric) {
  if (analytic.size() != numeric.size())
    throw InvalidArgument("grad_relative_error: length mismatch");
  double scale = 1e-8, worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  for (std::size_t i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]));
  return worst / scale;
}

}  // namespace ovclip
