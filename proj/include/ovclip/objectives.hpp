#pragma once

#include "ovclip/checkpoint.hpp"
#include "ovclip/graph.hpp"

namespace ovclip {

// Contrastive and auxiliary objectives. The symmetric InfoNCE loss treats the
// i-th video and i-th text as the matching pair: with scaled cosine logits L,
// the loss is the mean of cross entropy over rows and over columns against
// the diagonal. A batch of one pair scores exactly zero; identical embeddings
// for every pair score log n.

// Tape version, for training. `logits` must already carry the temperature.
template <typename S>
typename Graph<S>::Ref contrastive_from_logits(Graph<S>& g,
                                               typename Graph<S>::Ref logits) {
  auto a = g.xent_diag(logits);
  auto b = g.xent_diag(g.transpose(logits));
  return g.scale(g.add(a, b), 0.5);
}

// Plain evaluation version over unit-norm embedding matrices (n, d).
template <typename S>
double contrastive_loss(const Tensor<S>& video_emb, const Tensor<S>& text_emb,
                        double inv_temp) {
  if (!video_emb.same_shape(text_emb) || video_emb.rank() != 2)
    throw InvalidArgument("contrastive_loss: embeddings must share shape (n,d)");
  if (!(inv_temp > 0.0))
    throw InvalidArgument("contrastive_loss: inverse temperature must be positive");
  Eigen::Index n = video_emb.rows();
  if (n < 1) throw InvalidArgument("contrastive_loss: empty batch");
  auto check_unit = [](const Tensor<S>& e, const char* which) {
    for (Eigen::Index r = 0; r < e.rows(); ++r) {
      double nrm = std::sqrt(e.mat().row(r).template cast<double>().squaredNorm());
      if (std::abs(nrm - 1.0) > 1e-3)
        throw InvalidArgument(std::string("contrastive_loss: ") + which +
                              " row " + std::to_string(r) + " is not unit-norm");
    }
  };
  check_unit(video_emb, "video");
  check_unit(text_emb, "text");
  Eigen::MatrixXd logits = (video_emb.mat().template cast<double>() *
                            text_emb.mat().template cast<double>().transpose()) *
                           inv_temp;
  auto xent_rows = [&](const Eigen::MatrixXd& L) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < L.rows(); ++r) {
      double m = L.row(r).maxCoeff();
      double z = 0.0;
      for (Eigen::Index c = 0; c < L.cols(); ++c) z += std::exp(L(r, c) - m);
      acc += m + std::log(z) - L(r, r);
    }
    return acc / static_cast<double>(L.rows());
  };
  double loss = 0.5 * (xent_rows(logits) + xent_rows(logits.transpose()));
  if (!std::isfinite(loss)) throw NumericError("contrastive_loss: non-finite loss");
  return loss;
}

// Label loss plus gamma-weighted caption loss.
inline double combined_loss(double label_loss, double caption_loss, double gamma) {
  if (gamma < 0.0) throw InvalidArgument("combined_loss: gamma must be >= 0");
  double v = label_loss + gamma * caption_loss;
  if (!std::isfinite(v)) throw NumericError("combined_loss: non-finite loss");
  return v;
}

// Quadratic pull toward an anchor in weight space: mu * sum ||theta - anchor||^2.
template <typename S>
double l2_anchor_penalty(const BasicCheckpoint<S>& theta,
                         const BasicCheckpoint<S>& anchor, double mu) {
  if (mu < 0.0) throw InvalidArgument("l2_anchor_penalty: mu must be >= 0");
  check_same_structure(theta, anchor, "l2_anchor_penalty");
  double acc = 0.0;
  for (std::size_t i = 0; i < theta.params.size(); ++i) {
    const auto& a = theta.params[i].second.data;
    const auto& b = anchor.params[i].second.data;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      double d = static_cast<double>(a[j]) - static_cast<double>(b[j]);
      acc += d * d;
    }
  }
  return mu * acc;
}

// In-place gradient of the anchor penalty: grad += 2 mu (theta - anchor).
template <typename S>
void l2_anchor_add_grad(BasicCheckpoint<S>& grad, const BasicCheckpoint<S>& theta,
                        const BasicCheckpoint<S>& anchor, double mu) {
  check_same_structure(theta, anchor, "l2_anchor_add_grad");
  check_same_structure(grad, theta, "l2_anchor_add_grad");
  for (std::size_t i = 0; i < grad.params.size(); ++i)
    grad.params[i].second.data +=
        static_cast<S>(2.0 * mu) *
        (theta.params[i].second.data - anchor.params[i].second.data);
}

}  // namespace ovclip
