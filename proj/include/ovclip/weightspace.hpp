#pragma once

#include <functional>
#include <optional>

#include "ovclip/checkpoint.hpp"
#include "ovclip/objectives.hpp"
#include "ovclip/rng.hpp"

namespace ovclip {

// Weight-space training machinery: interpolated-weight regularization (IWR),
// stochastic weight averaging (SWA), the warmup+cosine learning-rate
// schedule, and the SGD loop that ties them together.
//
// IWR augments each step's gradient with the gradient taken at a random
// point on the line between the frozen anchor theta_A and the current
// weights: theta_tilde = alpha * theta_A + (1 - alpha) * theta, with
// alpha ~ U(0, R). Weighting the interpolated loss by C / (1 - alpha) makes
// the chain factor (1 - alpha) cancel, so the update direction is exactly
// g(theta) + C * g(theta_tilde).

template <typename S>
struct LossGrad {
  double loss = 0.0;
  BasicCheckpoint<S> grad;
};

template <typename S>
using GradFn = std::function<LossGrad<S>(const BasicCheckpoint<S>&)>;

inline double sample_alpha(double R, std::mt19937_64& eng) {
  if (R < 0.0 || R > 0.95)
    throw InvalidArgument("sample_alpha: R must lie in [0, 0.95]");
  return R * uniform01(eng);
}

template <typename S>
struct IwrResult {
  BasicCheckpoint<S> grad;
  double loss_at_theta = 0.0;
  double loss_at_interp = 0.0;
};

// g(theta) + C * g(alpha anchor + (1-alpha) theta). The C == 0 case takes a
// single pass and is exactly the plain gradient.
template <typename S>
IwrResult<S> iwr_gradient(const BasicCheckpoint<S>& theta,
                          const BasicCheckpoint<S>& anchor, double alpha,
                          double C, const GradFn<S>& fn) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw InvalidArgument("iwr_gradient: alpha must lie in [0,1)");
  if (C < 0.0) throw InvalidArgument("iwr_gradient: C must be >= 0");
  IwrResult<S> out;
  LossGrad<S> plain = fn(theta);
  if (!std::isfinite(plain.loss))
    throw NumericError("iwr_gradient: non-finite loss at theta");
  out.loss_at_theta = plain.loss;
  out.grad = std::move(plain.grad);
  if (C > 0.0) {
    check_same_structure(theta, anchor, "iwr_gradient");
    BasicCheckpoint<S> mid = interpolate(anchor, theta, alpha);
    LossGrad<S> tilted = fn(mid);
    if (!std::isfinite(tilted.loss))
      throw NumericError("iwr_gradient: non-finite loss at interpolated point");
    out.loss_at_interp = tilted.loss;
    add_scaled(out.grad, tilted.grad, C);
  }
  return out;
}

// Running average of absorbed checkpoints, accumulated in double so late
// absorptions do not lose precision: mean_{l+1} = (mean_l * l + theta)/(l+1).
class SwaState {
 public:
  SwaState(long start_step, long cycle_steps)
      : start_step_(start_step), cycle_steps_(cycle_steps) {
    if (start_step < 0 || cycle_steps <= 0)
      throw InvalidArgument("swa: start_step must be >= 0 and cycle > 0");
  }

  // Alg-style trigger: absorb when step > start and (step - start) is a
  // whole number of cycles. Returns true when theta was absorbed.
  bool maybe_absorb(long step, const Checkpoint& theta) {
    if (step <= start_step_ || (step - start_step_) % cycle_steps_ != 0)
      return false;
    absorb(theta);
    return true;
  }

  void absorb(const Checkpoint& theta) {
    if (count_ == 0) {
      accum_ = theta.cast<double>();
    } else {
      double l = static_cast<double>(count_);
      for (std::size_t i = 0; i < accum_.params.size(); ++i)
        accum_.params[i].second.data =
            (accum_.params[i].second.data * l +
             theta.params[i].second.data.cast<double>()) /
            (l + 1.0);
    }
    ++count_;
  }

  long count() const { return count_; }
  long start_step() const { return start_step_; }
  long cycle_steps() const { return cycle_steps_; }

  Checkpoint mean() const {
    if (count_ == 0) throw InvalidArgument("swa: no checkpoints absorbed");
    Checkpoint out = accum_.cast<float>();
    out.meta["swa.count"] = std::to_string(count_);
    return out;
  }

 private:
  long start_step_;
  long cycle_steps_;
  long count_ = 0;
  BasicCheckpoint<double> accum_;
};

// Model patching: blend the anchor with the tuned weights for deployment.
inline Checkpoint final_patch(const Checkpoint& anchor, const Checkpoint& tuned,
                              double lam) {
  Checkpoint out = interpolate(anchor, tuned, lam);
  out.meta = tuned.meta;
  out.meta["patch.lam"] = std::to_string(lam);
  out.meta["patch.anchor_hash"] = hash_hex(content_hash(anchor));
  out.meta["patch.tuned_hash"] = hash_hex(content_hash(tuned));
  return out;
}

// Warmup holds the floor rate, then cosine decay from peak back to floor.
// `step` is 1-based.
inline double lr_at(long step, long total_steps, long warmup_steps,
                    double peak, double floor) {
  if (step < 1 || total_steps < 1)
    throw InvalidArgument("lr_at: steps must be positive");
  if (!(peak >= floor && floor >= 0.0))
    throw InvalidArgument("lr_at: need peak >= floor >= 0");
  if (step <= warmup_steps) return floor;
  long denom = total_steps - warmup_steps;
  if (denom <= 0) return floor;
  double progress = static_cast<double>(step - warmup_steps) /
                    static_cast<double>(denom);
  return floor + 0.5 * (peak - floor) * (1.0 + std::cos(3.14159265358979323846 *
                                                        progress));
}

struct TrainConfig {
  int epochs = 10;
  int batch = 16;
  double lr_peak = 0.003;
  double lr_floor = 1e-4;
  int warmup_epochs = 2;
  double iwr_R = 0.0;
  double iwr_C = 0.0;
  double gamma = 0.0;
  bool iwr_caption_at_theta = false;  // literal two-point caption placement
  bool swa = false;
  double swa_start_epochs = 2.0;  // counted after warmup
  double swa_cycle_epochs = 1.0;
  double momentum = 0.0;
  double l2_anchor_mu = 0.0;
  bool freeze_text = true;
  int window = 3;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1 || batch < 1) throw InvalidConfig("train: epochs/batch must be >= 1");
    if (!(lr_peak >= lr_floor && lr_floor >= 0.0))
      throw InvalidConfig("train: need lr_peak >= lr_floor >= 0");
    if (warmup_epochs < 0 || warmup_epochs > epochs)
      throw InvalidConfig("train: warmup_epochs out of range");
    if (iwr_R < 0.0 || iwr_R > 0.95)
      throw InvalidConfig("train: iwr_R must lie in [0, 0.95]");
    if (iwr_C < 0.0) throw InvalidConfig("train: iwr_C must be >= 0");
    if (gamma < 0.0) throw InvalidConfig("train: gamma must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0)
      throw InvalidConfig("train: momentum must lie in [0,1)");
    if (l2_anchor_mu < 0.0) throw InvalidConfig("train: l2_anchor_mu must be >= 0");
    if (swa && (swa_start_epochs < 0.0 || swa_cycle_epochs <= 0.0))
      throw InvalidConfig("train: bad swa schedule");
    check_window(window);
  }
};

// Batch gradient provider: loss = label_w * L_label + caption_w * L_caption
// over the given sample indices, evaluated at `theta`, with gradients.
using BatchGradFn = std::function<LossGrad<float>(
    const Checkpoint& theta, const std::vector<int>& batch, double label_w,
    double caption_w)>;

using StepHook =
    std::function<void(long step, double lr, double loss, const Checkpoint& theta)>;

struct TrainResult {
  Checkpoint theta;       // final weights (theta_B)
  Checkpoint swa_mean;    // SWA average, == theta when SWA never absorbed
  long swa_count = 0;
  long steps = 0;
  double final_loss = 0.0;
};

// The SGD loop. Batch order and alpha draws come from independent seed
// streams, so disabling IWR (C == 0) leaves the batch sequence untouched and
// the loop degenerates bit-exactly into plain SGD fine-tuning.
inline TrainResult train_loop(const Checkpoint& init, const Checkpoint& anchor,
                              int n_samples, const TrainConfig& cfg,
                              const BatchGradFn& fn, const StepHook& hook = {}) {
  cfg.validate();
  if (n_samples < 1) throw InvalidArgument("train_loop: no samples");
  check_same_structure(init, anchor, "train_loop");

  const long steps_per_epoch = (n_samples + cfg.batch - 1) / cfg.batch;
  const long total_steps = steps_per_epoch * cfg.epochs;
  const long warmup_steps = steps_per_epoch * cfg.warmup_epochs;
  const long swa_start =
      warmup_steps + static_cast<long>(cfg.swa_start_epochs * steps_per_epoch);
  const long swa_cycle = std::max<long>(
      1, static_cast<long>(cfg.swa_cycle_epochs * steps_per_epoch));

  std::mt19937_64 batch_rng = make_engine(cfg.seed, "batch-order");
  std::mt19937_64 alpha_rng = make_engine(cfg.seed, "iwr-alpha");

  Checkpoint theta = init;
  std::optional<SwaState> swa;
  if (cfg.swa) swa.emplace(swa_start, swa_cycle);
  std::optional<Checkpoint> velocity;
  if (cfg.momentum > 0.0) velocity = zeros_like(init);

  auto mask_frozen = [&](Checkpoint& g) {
    if (!cfg.freeze_text) return;
    for (auto& [name, t] : g.params)
      if (name.rfind("text.", 0) == 0) t.data.setZero();
  };

  long step = 0;
  double last_loss = 0.0;
  std::vector<int> order(n_samples);
  for (int i = 0; i < n_samples; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_inplace(order, batch_rng);
    for (long b = 0; b < steps_per_epoch; ++b) {
      ++step;
      double lr = lr_at(step, total_steps, warmup_steps, cfg.lr_peak, cfg.lr_floor);
      std::vector<int> batch(
          order.begin() + b * cfg.batch,
          order.begin() + std::min<long>((b + 1) * cfg.batch, n_samples));

      double alpha = 0.0;
      Checkpoint grad;
      double loss;
      if (cfg.iwr_C > 0.0) {
        alpha = sample_alpha(cfg.iwr_R, alpha_rng);
        if (cfg.iwr_caption_at_theta && cfg.gamma > 0.0) {
          // literal reading of the update rule: the caption term of the
          // interpolated loss stays at theta, so its gradient carries the
          // undamped weight C/(1-alpha) * gamma instead of C * gamma
          LossGrad<float> at_theta = fn(theta, batch, 1.0, cfg.gamma);
          Checkpoint mid = interpolate(anchor, theta, alpha);
          LossGrad<float> at_mid = fn(mid, batch, 1.0, 0.0);
          LossGrad<float> cap_theta = fn(theta, batch, 0.0, cfg.gamma);
          for (auto* lg : {&at_theta, &at_mid, &cap_theta})
            if (!std::isfinite(lg->loss))
              throw NumericError("train_loop: non-finite loss at step " +
                                 std::to_string(step) + ", alpha " +
                                 std::to_string(alpha));
          grad = std::move(at_theta.grad);
          add_scaled(grad, at_mid.grad, cfg.iwr_C);
          add_scaled(grad, cap_theta.grad, cfg.iwr_C / (1.0 - alpha));
          loss = at_theta.loss;
        } else {
          IwrResult<float> r;
          try {
            r = iwr_gradient<float>(
                theta, anchor, alpha, cfg.iwr_C,
                [&](const Checkpoint& t) { return fn(t, batch, 1.0, cfg.gamma); });
          } catch (const NumericError& e) {
            throw NumericError("train_loop: step " + std::to_string(step) +
                               ", alpha " + std::to_string(alpha) + ": " +
                               e.what());
          }
          grad = std::move(r.grad);
          loss = r.loss_at_theta;
        }
      } else {
        LossGrad<float> r = fn(theta, batch, 1.0, cfg.gamma);
        if (!std::isfinite(r.loss))
          throw NumericError("train_loop: non-finite loss at step " +
                             std::to_string(step) + ", alpha 0");
        grad = std::move(r.grad);
        loss = r.loss;
      }
      if (cfg.l2_anchor_mu > 0.0)
        l2_anchor_add_grad(grad, theta, anchor, cfg.l2_anchor_mu);
      mask_frozen(grad);

      if (velocity) {
        for (std::size_t i = 0; i < velocity->params.size(); ++i)
          velocity->params[i].second.data =
              velocity->params[i].second.data * static_cast<float>(cfg.momentum) +
              grad.params[i].second.data;
        add_scaled(theta, *velocity, -lr);
      } else {
        add_scaled(theta, grad, -lr);
      }
      last_loss = loss;
      if (swa) swa->maybe_absorb(step, theta);
      if (hook) hook(step, lr, loss, theta);
    }
  }

  TrainResult out;
  out.steps = step;
  out.final_loss = last_loss;
  out.swa_count = swa ? swa->count() : 0;
  out.swa_mean = (swa && swa->count() > 0) ? swa->mean() : theta;
  out.theta = std::move(theta);
  return out;
}

}  // namespace ovclip
