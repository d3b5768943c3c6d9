#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "rcdepth/map_ops.hpp"
#include "rcdepth/rng.hpp"
#include "rcdepth/types.hpp"

namespace rcdepth {

// Lower clamp on 1/s so composed depths stay finite when the rectifier
// saturates at zero.
inline constexpr double kEpsScale = 1e-3;
inline constexpr double kLeakySlope = 0.01;

// Branch layout of the smoothed L1. QuadraticCore is the standard form
// (quadratic for small residuals); LinearCore swaps the branches.
enum class SmoothL1Variant : uint8_t { QuadraticCore, LinearCore };

struct ComposeResult {
  FloatMap s;      // per-pixel scale
  FloatMap d_hat;  // refined metric depth
};

// Final scale composition: 1/s = max(1 + r, 0) clamped below at kEpsScale,
// d_hat = s / z_ga. Clamped pixels stay valid but are flagged.
inline ComposeResult compose(const FloatMap& z_ga, const FloatMap& r) {
  require_same_shape(z_ga, r, "compose");
  if (z_ga.kind != MapKind::InverseDepth)
    throw Error(ErrorCode::KindMismatch, "compose expects inverse depth");
  ComposeResult out;
  out.s = FloatMap(MapKind::Scale, z_ga.width, z_ga.height);
  out.d_hat = FloatMap(MapKind::Depth, z_ga.width, z_ga.height);
  for (size_t i = 0; i < z_ga.size(); ++i) {
    if (!z_ga.valid[i] || !r.valid[i]) continue;
    double inv_s = 1.0 + r.values[i];
    bool clamped = !(inv_s > kEpsScale);
    if (clamped) inv_s = kEpsScale;
    double s = 1.0 / inv_s;
    out.s.values[i] = s;
    out.s.valid[i] = 1;
    out.d_hat.values[i] = s / z_ga.values[i];
    out.d_hat.valid[i] = 1;
    if (clamped) {
      out.s.set_flag(static_cast<int>(i) / z_ga.width,
                     static_cast<int>(i) % z_ga.width);
      out.d_hat.set_flag(static_cast<int>(i) / z_ga.width,
                         static_cast<int>(i) % z_ga.width);
    }
  }
  return out;
}

namespace detail {

inline double smooth_l1_term(double diff, double beta, SmoothL1Variant v) {
  double r = std::abs(diff);
  bool small = r < beta;
  if (v == SmoothL1Variant::LinearCore) small = !small;
  return small ? r * r / (2.0 * beta) : r - beta / 2.0;
}

// d(term)/d(diff); at the branch point the quadratic side is used.
inline double smooth_l1_slope(double diff, double beta, SmoothL1Variant v) {
  double r = std::abs(diff);
  double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  bool small = r < beta;
  if (v == SmoothL1Variant::LinearCore) small = !small;
  return small ? diff / beta : sign;
}

}  // namespace detail

// Mean smoothed-L1 penalty over pixels valid in both maps.
inline double smooth_l1(const FloatMap& d, const FloatMap& d_hat, double beta,
                        SmoothL1Variant variant = SmoothL1Variant::QuadraticCore) {
  require_same_shape(d, d_hat, "smooth_l1");
  if (!(beta > 0.0))
    throw Error(ErrorCode::InvalidParams, "smooth_l1: beta must be positive");
  KahanSum s;
  size_t n = 0;
  for (size_t i = 0; i < d.size(); ++i) {
    if (!d.valid[i] || !d_hat.valid[i]) continue;
    s.add(detail::smooth_l1_term(d.values[i] - d_hat.values[i], beta, variant));
    ++n;
  }
  if (n == 0)
    throw Error(ErrorCode::EmptyDomain, "smooth_l1: no jointly valid pixel");
  return s.value() / static_cast<double>(n);
}

struct TrainConfig {
  double learning_rate = 1e-3;
  int iterations = 0;
  double lambda_gt = 1.0;
  double beta = 1.0;
  uint64_t seed = 0;
  double momentum = 0.0;
  bool guarded = false;  // halve the step until the loss is non-increasing
  SmoothL1Variant variant = SmoothL1Variant::QuadraticCore;
};

// L(d_int, d_hat) + lambda_gt * L(d_gt, d_hat), each term averaged over its
// own valid domain. A term with an empty domain contributes zero; both empty
// is an error.
inline double sml_loss(const FloatMap& d_gt, const FloatMap& d_int,
                       const FloatMap& d_hat, const TrainConfig& cfg) {
  require_same_shape(d_gt, d_hat, "sml_loss");
  require_same_shape(d_int, d_hat, "sml_loss");
  bool any = false;
  double total = 0.0;
  try {
    total += smooth_l1(d_int, d_hat, cfg.beta, cfg.variant);
    any = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyDomain) throw;
  }
  try {
    total += cfg.lambda_gt * smooth_l1(d_gt, d_hat, cfg.beta, cfg.variant);
    any = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyDomain) throw;
  }
  if (!any)
    throw Error(ErrorCode::EmptyDomain, "sml_loss: both target domains empty");
  return total;
}

// Three 3x3 cross-correlation layers, 2 -> 16 -> 16 -> 1 channels, leaky
// rectifier on the hidden activations, linear output.
struct RefinerParams {
  static constexpr int kInChannels = 2;
  static constexpr int kHidden = 16;
  static constexpr int kKernel = 3;

  std::vector<double> w1 = std::vector<double>(kHidden * kInChannels * 9, 0.0);
  std::vector<double> b1 = std::vector<double>(kHidden, 0.0);
  std::vector<double> w2 = std::vector<double>(kHidden * kHidden * 9, 0.0);
  std::vector<double> b2 = std::vector<double>(kHidden, 0.0);
  std::vector<double> w3 = std::vector<double>(1 * kHidden * 9, 0.0);
  std::vector<double> b3 = std::vector<double>(1, 0.0);

  static size_t param_count() {
    return static_cast<size_t>(kHidden * kInChannels * 9 + kHidden +
                               kHidden * kHidden * 9 + kHidden + kHidden * 9 +
                               1);
  }

  static RefinerParams zeros() { return RefinerParams{}; }

  // He-style scaled Gaussian kernels, zero biases.
  static RefinerParams seeded(uint64_t seed, double gain = 1.0) {
    RefinerParams p;
    StreamRng rng(seed, 0x696E6974ULL);  // "init"
    auto fill = [&](std::vector<double>& w, int fan_in) {
      double std_dev = gain * std::sqrt(2.0 / fan_in);
      for (double& v : w) v = std_dev * rng.gaussian();
    };
    fill(p.w1, kInChannels * 9);
    fill(p.w2, kHidden * 9);
    fill(p.w3, kHidden * 9);
    return p;
  }

  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const auto* v : {&w1, &b1, &w2, &b2, &w3, &b3})
      flat.insert(flat.end(), v->begin(), v->end());
    return flat;
  }

  static RefinerParams from_flat(const std::vector<double>& flat) {
    if (flat.size() != param_count())
      throw Error(ErrorCode::ShapeMismatch,
                  "checkpoint holds " + std::to_string(flat.size()) +
                      " values, expected " + std::to_string(param_count()));
    RefinerParams p;
    size_t off = 0;
    for (auto* v : {&p.w1, &p.b1, &p.w2, &p.b2, &p.w3, &p.b3}) {
      std::copy(flat.begin() + off, flat.begin() + off + v->size(),
                v->begin());
      off += v->size();
    }
    return p;
  }

  void axpy(double alpha, const RefinerParams& g) {
    auto upd = [alpha](std::vector<double>& dst, const std::vector<double>& src) {
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
    };
    upd(w1, g.w1);
    upd(b1, g.b1);
    upd(w2, g.w2);
    upd(b2, g.b2);
    upd(w3, g.w3);
    upd(b3, g.b3);
  }

  void scale_by(double alpha) {
    for (auto* v : {&w1, &b1, &w2, &b2, &w3, &b3})
      for (double& x : *v) x *= alpha;
  }
};

namespace detail {

// out[oc] = b[oc] + sum_ic corr3x3(in[ic], w[oc][ic]); zero padding.
inline void conv3x3_forward(const double* in, int cin, int h, int w_px,
                            const double* weights, const double* bias,
                            double* out, int cout) {
  for (int oc = 0; oc < cout; ++oc) {
    double* out_ch = out + static_cast<size_t>(oc) * h * w_px;
    std::fill(out_ch, out_ch + static_cast<size_t>(h) * w_px, bias[oc]);
    for (int ic = 0; ic < cin; ++ic) {
      const double* in_ch = in + static_cast<size_t>(ic) * h * w_px;
      const double* wp = weights + (static_cast<size_t>(oc) * cin + ic) * 9;
      for (int y = 0; y < h; ++y) {
        double* orow = out_ch + static_cast<size_t>(y) * w_px;
        for (int ky = 0; ky < 3; ++ky) {
          int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const double* irow = in_ch + static_cast<size_t>(sy) * w_px;
          double w0 = wp[ky * 3], w1 = wp[ky * 3 + 1], w2 = wp[ky * 3 + 2];
          orow[0] += w1 * irow[0];
          if (w_px > 1) orow[0] += w2 * irow[1];
          for (int x = 1; x < w_px - 1; ++x)
            orow[x] += w0 * irow[x - 1] + w1 * irow[x] + w2 * irow[x + 1];
          if (w_px > 1) {
            orow[w_px - 1] += w0 * irow[w_px - 2] + w1 * irow[w_px - 1];
          }
        }
      }
    }
  }
}

// din[ic] += sum_oc corr3x3(dout[oc], flip(w[oc][ic])). din must be zeroed.
inline void conv3x3_backward_input(const double* dout, int cout, int h,
                                   int w_px, const double* weights, int cin,
                                   double* din) {
  for (int ic = 0; ic < cin; ++ic) {
    double* din_ch = din + static_cast<size_t>(ic) * h * w_px;
    for (int oc = 0; oc < cout; ++oc) {
      const double* dout_ch = dout + static_cast<size_t>(oc) * h * w_px;
      const double* wp = weights + (static_cast<size_t>(oc) * cin + ic) * 9;
      for (int y = 0; y < h; ++y) {
        double* drow = din_ch + static_cast<size_t>(y) * w_px;
        for (int ky = 0; ky < 3; ++ky) {
          int sy = y - (ky - 1);
          if (sy < 0 || sy >= h) continue;
          const double* srow = dout_ch + static_cast<size_t>(sy) * w_px;
          // shifting by -(kx-1): use the flipped kernel row
          double w0 = wp[ky * 3], w1 = wp[ky * 3 + 1], w2 = wp[ky * 3 + 2];
          // din[y][x] += w[ky][kx] * dout[y-(ky-1)][x-(kx-1)]
          drow[0] += w1 * srow[0];
          if (w_px > 1) drow[0] += w0 * srow[1];
          for (int x = 1; x < w_px - 1; ++x)
            drow[x] += w2 * srow[x - 1] + w1 * srow[x] + w0 * srow[x + 1];
          if (w_px > 1)
            drow[w_px - 1] += w2 * srow[w_px - 2] + w1 * srow[w_px - 1];
        }
      }
    }
  }
}

// dw[oc][ic][ky][kx] += sum_{y,x} dout[oc][y][x] * in[ic][y+ky-1][x+kx-1];
// db[oc] += sum dout[oc].
inline void conv3x3_backward_params(const double* in, int cin, int h, int w_px,
                                    const double* dout, int cout, double* dw,
                                    double* db) {
  for (int oc = 0; oc < cout; ++oc) {
    const double* dout_ch = dout + static_cast<size_t>(oc) * h * w_px;
    double bsum = 0.0;
    for (size_t i = 0; i < static_cast<size_t>(h) * w_px; ++i)
      bsum += dout_ch[i];
    db[oc] += bsum;
    for (int ic = 0; ic < cin; ++ic) {
      const double* in_ch = in + static_cast<size_t>(ic) * h * w_px;
      double* wp = dw + (static_cast<size_t>(oc) * cin + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          double acc = 0.0;
          int dy = ky - 1, dx = kx - 1;
          int y_lo = std::max(0, -dy), y_hi = h - 1 - std::max(0, dy);
          int x_lo = std::max(0, -dx), x_hi = w_px - 1 - std::max(0, dx);
          for (int y = y_lo; y <= y_hi; ++y) {
            const double* drow = dout_ch + static_cast<size_t>(y) * w_px;
            const double* irow =
                in_ch + static_cast<size_t>(y + dy) * w_px + dx;
            for (int x = x_lo; x <= x_hi; ++x) acc += drow[x] * irow[x];
          }
          wp[ky * 3 + kx] += acc;
        }
      }
    }
  }
}

inline void leaky_forward(std::vector<double>& a) {
  for (double& v : a)
    if (v < 0.0) v *= kLeakySlope;
}

struct ForwardTrace {
  int h = 0, w = 0;
  std::vector<double> input;  // 2 channels
  std::vector<double> pre1, act1, pre2, act2, residual;
};

inline ForwardTrace refiner_trace(const RefinerParams& p, const FloatMap& z_ga,
                                  const FloatMap& inv_s_q) {
  require_same_shape(z_ga, inv_s_q, "refiner_forward");
  const int h = z_ga.height, w = z_ga.width;
  const size_t hw = static_cast<size_t>(h) * w;
  ForwardTrace t;
  t.h = h;
  t.w = w;
  t.input.resize(2 * hw);
  std::copy(z_ga.values.begin(), z_ga.values.end(), t.input.begin());
  std::copy(inv_s_q.values.begin(), inv_s_q.values.end(),
            t.input.begin() + hw);

  t.pre1.resize(RefinerParams::kHidden * hw);
  conv3x3_forward(t.input.data(), 2, h, w, p.w1.data(), p.b1.data(),
                  t.pre1.data(), RefinerParams::kHidden);
  t.act1 = t.pre1;
  leaky_forward(t.act1);

  t.pre2.resize(RefinerParams::kHidden * hw);
  conv3x3_forward(t.act1.data(), RefinerParams::kHidden, h, w, p.w2.data(),
                  p.b2.data(), t.pre2.data(), RefinerParams::kHidden);
  t.act2 = t.pre2;
  leaky_forward(t.act2);

  t.residual.resize(hw);
  conv3x3_forward(t.act2.data(), RefinerParams::kHidden, h, w, p.w3.data(),
                  p.b3.data(), t.residual.data(), 1);
  return t;
}

}  // namespace detail

// Dense residual map from the concatenated (z_ga, 1/s_q) input. Invalid
// input pixels contribute their 0.0 sentinel; callers pass filled maps.
inline FloatMap refiner_forward(const RefinerParams& p, const FloatMap& z_ga,
                                const FloatMap& inv_s_q) {
  detail::ForwardTrace t = detail::refiner_trace(p, z_ga, inv_s_q);
  FloatMap r(MapKind::Residual, z_ga.width, z_ga.height);
  r.values = std::move(t.residual);
  std::fill(r.valid.begin(), r.valid.end(), uint8_t{1});
  return r;
}

// One training frame for the refiner.
struct RefineFrame {
  FloatMap z_ga;
  FloatMap inv_s_q;
  FloatMap d_gt;
  FloatMap d_int;
};

struct LossAndGrad {
  double loss = 0.0;
  RefinerParams grad;
};

// Reverse-mode gradient of sml_loss(compose(z_ga, forward(...))) with
// respect to every parameter. Smoothed-L1 subgradient at the branch point
// comes from the quadratic side; the rectifier subgradient at the clamp is 0.
inline LossAndGrad refiner_grad(const RefinerParams& p,
                                const RefineFrame& frame,
                                const TrainConfig& cfg) {
  detail::ForwardTrace t = detail::refiner_trace(p, frame.z_ga, frame.inv_s_q);
  const int h = t.h, w = t.w;
  const size_t hw = static_cast<size_t>(h) * w;

  // compose
  FloatMap r(MapKind::Residual, w, h);
  r.values = t.residual;
  std::fill(r.valid.begin(), r.valid.end(), uint8_t{1});
  ComposeResult comp = compose(frame.z_ga, r);

  LossAndGrad out;
  out.loss = sml_loss(frame.d_gt, frame.d_int, comp.d_hat, cfg);

  // dL/dd_hat over both loss domains
  size_t n_int = 0, n_gt = 0;
  for (size_t i = 0; i < hw; ++i) {
    if (frame.d_int.valid[i] && comp.d_hat.valid[i]) ++n_int;
    if (frame.d_gt.valid[i] && comp.d_hat.valid[i]) ++n_gt;
  }
  std::vector<double> d_dhat(hw, 0.0);
  for (size_t i = 0; i < hw; ++i) {
    if (!comp.d_hat.valid[i]) continue;
    double acc = 0.0;
    if (frame.d_int.valid[i] && n_int > 0)
      acc += detail::smooth_l1_slope(comp.d_hat.values[i] -
                                         frame.d_int.values[i],
                                     cfg.beta, cfg.variant) /
             static_cast<double>(n_int);
    if (frame.d_gt.valid[i] && n_gt > 0)
      acc += cfg.lambda_gt *
             detail::smooth_l1_slope(comp.d_hat.values[i] -
                                         frame.d_gt.values[i],
                                     cfg.beta, cfg.variant) /
             static_cast<double>(n_gt);
    d_dhat[i] = acc;
  }

  // d_hat = 1 / (q * z_ga) with q = max(1 + r, kEpsScale)
  std::vector<double> d_res(hw, 0.0);
  for (size_t i = 0; i < hw; ++i) {
    if (d_dhat[i] == 0.0 || !comp.d_hat.valid[i]) continue;
    double q = 1.0 + t.residual[i];
    if (!(q > kEpsScale)) continue;  // clamped: zero subgradient
    double z = frame.z_ga.values[i];
    d_res[i] = d_dhat[i] * (-1.0 / (q * q * z));
  }

  // backprop through the three correlation layers
  const int hidden = RefinerParams::kHidden;
  detail::conv3x3_backward_params(t.act2.data(), hidden, h, w, d_res.data(), 1,
                                  out.grad.w3.data(), out.grad.b3.data());
  std::vector<double> d_act2(hidden * hw, 0.0);
  detail::conv3x3_backward_input(d_res.data(), 1, h, w, p.w3.data(), hidden,
                                 d_act2.data());
  for (size_t i = 0; i < d_act2.size(); ++i)
    if (t.pre2[i] < 0.0) d_act2[i] *= kLeakySlope;

  detail::conv3x3_backward_params(t.act1.data(), hidden, h, w, d_act2.data(),
                                  hidden, out.grad.w2.data(),
                                  out.grad.b2.data());
  std::vector<double> d_act1(hidden * hw, 0.0);
  detail::conv3x3_backward_input(d_act2.data(), hidden, h, w, p.w2.data(),
                                 hidden, d_act1.data());
  for (size_t i = 0; i < d_act1.size(); ++i)
    if (t.pre1[i] < 0.0) d_act1[i] *= kLeakySlope;

  detail::conv3x3_backward_params(t.input.data(), 2, h, w, d_act1.data(),
                                  hidden, out.grad.w1.data(),
                                  out.grad.b1.data());
  return out;
}

struct TrainResult {
  RefinerParams params;
  std::vector<double> history;  // loss before training, then one per step
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(TrainResult partial)
      : Error(ErrorCode::DivergenceDetected, "non-finite training loss"),
        partial_(std::move(partial)) {}

  const TrainResult& partial() const { return partial_; }

 private:
  TrainResult partial_;
};

namespace detail {

inline LossAndGrad batch_loss_and_grad(const RefinerParams& p,
                                       const std::vector<RefineFrame>& batch,
                                       const TrainConfig& cfg) {
  LossAndGrad total;
  for (const RefineFrame& f : batch) {
    LossAndGrad lg = refiner_grad(p, f, cfg);
    total.loss += lg.loss;
    total.grad.axpy(1.0, lg.grad);
  }
  double inv_n = 1.0 / static_cast<double>(batch.size());
  total.loss *= inv_n;
  total.grad.scale_by(inv_n);
  return total;
}

inline double batch_loss(const RefinerParams& p,
                         const std::vector<RefineFrame>& batch,
                         const TrainConfig& cfg) {
  double total = 0.0;
  for (const RefineFrame& f : batch) {
    ForwardTrace t = refiner_trace(p, f.z_ga, f.inv_s_q);
    FloatMap r(MapKind::Residual, t.w, t.h);
    r.values = std::move(t.residual);
    std::fill(r.valid.begin(), r.valid.end(), uint8_t{1});
    total += sml_loss(f.d_gt, f.d_int, compose(f.z_ga, r).d_hat, cfg);
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace detail

// Gradient descent (optional momentum; optional guarded mode that halves the
// step until the loss is non-increasing). Deterministic given the data and
// config.
inline TrainResult train_refiner(const RefinerParams& init,
                                 const std::vector<RefineFrame>& batch,
                                 const TrainConfig& cfg) {
  if (batch.empty())
    throw Error(ErrorCode::EmptyInput, "train_refiner: no frames");

  TrainResult res;
  res.params = init;
  double lr = cfg.learning_rate;

  if (cfg.guarded) {
    double current = detail::batch_loss(res.params, batch, cfg);
    if (!std::isfinite(current)) throw DivergenceError(std::move(res));
    res.history.push_back(current);
    for (int it = 0; it < cfg.iterations; ++it) {
      LossAndGrad lg = detail::batch_loss_and_grad(res.params, batch, cfg);
      if (!std::isfinite(lg.loss)) throw DivergenceError(std::move(res));
      for (;;) {
        RefinerParams candidate = res.params;
        candidate.axpy(-lr, lg.grad);
        double next = detail::batch_loss(candidate, batch, cfg);
        if (std::isfinite(next) && next <= current) {
          res.params = std::move(candidate);
          current = next;
          break;
        }
        lr *= 0.5;
        if (lr < 1e-18) break;  // no acceptable step; keep params
      }
      res.history.push_back(current);
    }
    return res;
  }

  RefinerParams velocity;  // zeros
  for (int it = 0; it < cfg.iterations; ++it) {
    LossAndGrad lg = detail::batch_loss_and_grad(res.params, batch, cfg);
    if (!std::isfinite(lg.loss)) throw DivergenceError(std::move(res));
    res.history.push_back(lg.loss);
    if (cfg.momentum != 0.0) {
      velocity.scale_by(cfg.momentum);
      velocity.axpy(1.0, lg.grad);
      res.params.axpy(-lr, velocity);
    } else {
      res.params.axpy(-lr, lg.grad);
    }
  }
  double final_loss = detail::batch_loss(res.params, batch, cfg);
  if (!std::isfinite(final_loss)) throw DivergenceError(std::move(res));
  res.history.push_back(final_loss);
  return res;
}

}  // namespace rcdepth
