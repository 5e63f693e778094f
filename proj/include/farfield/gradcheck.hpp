// farfield/gradcheck.hpp

// Copyright 2026  The farfield authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "farfield/masks.hpp"
#include "farfield/pipeline.hpp"
#include "farfield/rng.hpp"
#include "farfield/simulate.hpp"
#include "farfield/stft.hpp"

namespace farfield {

// Numerical verification that the mask-to-loss map of the enhancement chain
// is smooth: central difference quotients at shrinking step sizes must
// converge at second order wherever no clamp or solver fallback is hit.
// This is what makes the chain usable as a differentiable back end for
// mask estimators trained end to end.

enum class ProbePipeline { kWpeOnly, kMvdrOnly, kFull };
enum class ProbeLoss { kStftMse, kLogmelMse, kOutputPower };

// What the perturbed variable is: the mask itself (kept inside [0, 1]), or
// a pre-activation that reaches the mask through clipped ReLU or sigmoid.
enum class MaskParam { kDirect, kClippedRelu, kSigmoid };

struct GraphProbe {
  ProbePipeline pipeline = ProbePipeline::kFull;
  ProbeLoss loss = ProbeLoss::kStftMse;
  MaskParam param = MaskParam::kDirect;
  std::uint64_t seed = 1;
  std::vector<double> steps = {1e-2, 1e-3, 1e-4};

  // probe scene shape
  int channels = 2;
  double duration = 0.8;
  double t60 = 0.3;
  double snr_db = 10.0;
  int fft_size = 256;
  int hop = 64;

  void validate() const {
    require(steps.size() >= 3, "need at least three step sizes");
    for (std::size_t i = 0; i < steps.size(); ++i) {
      require(steps[i] > 1e-12, "step sizes must exceed 1e-12");
      if (i > 0) require(steps[i] < steps[i - 1], "steps must be strictly decreasing");
    }
    require(channels >= 1 && duration > 0.0 && t60 >= 0.0, "bad probe scene");
    require(is_power_of_two(fft_size) && hop >= 1, "bad probe stft shape");
  }
};

// Masks for all stages a probe perturbs; absent stages stay disengaged.
struct MaskPoint {
  std::optional<MaskTensor> wpe;
  std::optional<MaskTensor> speech;
  std::optional<MaskTensor> noise;
};

struct DerivativeRecord {
  std::vector<double> steps;
  std::vector<double> quotients;
  double extrapolated = 0.0;
  double observed_order = 0.0;
  double loss_scale = 0.0;  // largest |loss| seen while probing
  bool converged = false;
  bool fallback_flagged = false;
};

inline double scalar_loss_stft_mse(const StftTensor& x, const StftTensor& target) {
  x.validate_shape();
  target.validate_shape();
  require(x.frames == target.frames && x.bins == target.bins,
          "loss target shape mismatch");
  require(x.channels == target.channels || target.channels == 1,
          "loss target channels must match or broadcast");
  double acc = 0.0;
  for (int t = 0; t < x.frames; ++t)
    for (int b = 0; b < x.bins; ++b)
      for (int m = 0; m < x.channels; ++m)
        acc += std::norm(x.at(t, b, m) -
                         target.at(t, b, std::min(m, target.channels - 1)));
  return acc / (static_cast<double>(x.frames) * x.bins * x.channels);
}

inline double scalar_loss_output_power(const StftTensor& x) {
  return mean_power(x);
}

inline double scalar_loss_feature_mse(const FeatureMatrix& f,
                                      const FeatureMatrix& target) {
  require(f.frames == target.frames && f.dims == target.dims,
          "feature loss target shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const double d = f.values[i] - target.values[i];
    acc += d * d;
  }
  return acc / std::max<std::size_t>(f.values.size(), 1);
}

namespace grad_detail {

inline MaskTensor map_activation(const MaskTensor& z, MaskParam param) {
  if (param == MaskParam::kDirect) {
    z.validate_range();
    return z;
  }
  MaskTensor w = z;
  const Activation act = (param == MaskParam::kClippedRelu)
                             ? Activation::kClippedRelu1
                             : Activation::kSigmoid;
  for (double& v : w.values) v = clamp_activation(v, act);
  return w;
}

inline MaskPoint axpy(const MaskPoint& point, const MaskPoint& dir, double h) {
  MaskPoint out = point;
  auto add = [h](std::optional<MaskTensor>& dst, const std::optional<MaskTensor>& d) {
    if (!dst) return;
    require(d.has_value(), "direction is missing a mask the point carries");
    require(d->values.size() == dst->values.size(), "direction shape mismatch");
    for (std::size_t i = 0; i < dst->values.size(); ++i)
      dst->values[i] += h * d->values[i];
  };
  add(out.wpe, dir.wpe);
  add(out.speech, dir.speech);
  add(out.noise, dir.noise);
  return out;
}

}  // namespace grad_detail

// Owns the probe's frozen scene and loss target so that repeated
// evaluations only pay for the pipeline itself.
class ProbeRunner {
 public:
  explicit ProbeRunner(const GraphProbe& probe) : probe_(probe) {
    probe.validate();
    SceneConfig scene_cfg;
    scene_cfg.seed = probe.seed;
    scene_cfg.channels = probe.channels;
    scene_cfg.duration = probe.duration;
    scene_cfg.rir.t60 = probe.t60;
    scene_cfg.noise.snr_db = probe.snr_db;
    scene_cfg.label_frame = probe.fft_size;
    scene_cfg.label_hop = probe.hop;
    const SceneBundle scene = render_scene(scene_cfg);

    stft_cfg_ = StftConfig::make(probe.fft_size, probe.hop);
    input_ = stft(scene.observed, stft_cfg_);
    target_stft_ = stft(scene.dry, stft_cfg_);

    wpe_cfg_.validate();
    mel_cfg_.fft_size = probe.fft_size;
    mel_cfg_.sample_rate = scene_cfg.sample_rate;
    mel_cfg_.f_max = scene_cfg.sample_rate / 2.0;
    if (probe.loss == ProbeLoss::kLogmelMse)
      target_feats_ = mvn(logmel(target_stft_, mel_cfg_));
  }

  const StftTensor& input() const { return input_; }

  bool needs_wpe() const { return probe_.pipeline != ProbePipeline::kMvdrOnly; }
  bool needs_beamformer() const {
    return probe_.pipeline != ProbePipeline::kWpeOnly;
  }

  // Loss at an unmapped parameter point. Records whether any regularized
  // solve fell back during the evaluation.
  double loss_at(const MaskPoint& point, bool* fallback_hit = nullptr) const {
    WpeDiagnostics wd;
    MvdrDiagnostics md;
    const StftTensor* cur = &input_;
    StftTensor derev, beamformed;

    if (needs_wpe()) {
      require(point.wpe.has_value(), "probe point is missing the wpe mask");
      const MaskTensor w = grad_detail::map_activation(*point.wpe, probe_.param);
      derev = wpe_oneshot(*cur, w, wpe_cfg_, &wd);
      cur = &derev;
    }
    if (needs_beamformer()) {
      require(point.speech.has_value() && point.noise.has_value(),
              "probe point is missing beamformer masks");
      const MaskTensor ws = grad_detail::map_activation(*point.speech, probe_.param);
      const MaskTensor wn = grad_detail::map_activation(*point.noise, probe_.param);
      beamformed = mvdr_pipeline(*cur, ws, wn, mvdr_opts_, &md);
      cur = &beamformed;
    }
    if (fallback_hit != nullptr)
      *fallback_hit = (wd.degenerate_bins > 0 || md.fallback_bins > 0);

    switch (probe_.loss) {
      case ProbeLoss::kStftMse:
        return scalar_loss_stft_mse(*cur, target_stft_);
      case ProbeLoss::kOutputPower:
        return scalar_loss_output_power(*cur);
      case ProbeLoss::kLogmelMse: {
        const StftTensor mono = (cur->channels == 1) ? *cur : extract_channel(*cur, 0);
        return scalar_loss_feature_mse(mvn(logmel(mono, mel_cfg_)), target_feats_);
      }
    }
    fail("unreachable loss kind");
  }

  // (L(p + h d) - L(p - h d)) / (2h). For direct parametrization both
  // endpoints must stay inside [0, 1]; map_activation enforces it.
  double directional_derivative(const MaskPoint& point, const MaskPoint& dir,
                                double h, bool* fallback_hit = nullptr,
                                double* loss_scale = nullptr) const {
    require(h > 0.0, "step size must be positive");
    bool fb_plus = false, fb_minus = false;
    const double lp = loss_at(grad_detail::axpy(point, dir, h), &fb_plus);
    const double lm = loss_at(grad_detail::axpy(point, dir, -h), &fb_minus);
    if (fallback_hit != nullptr) *fallback_hit = fb_plus || fb_minus;
    if (loss_scale != nullptr)
      *loss_scale = std::max(std::abs(lp), std::abs(lm));
    return (lp - lm) / (2.0 * h);
  }

  // Quotients across the step list plus a convergence-order estimate from
  // consecutive quotient differences: for a smooth loss the central
  // difference error falls as h^2, so log-ratios of the differences land
  // near 2. One loss evaluation carries a relative rounding error well
  // below kEvalNoise, and dividing by 2h turns that into a quotient noise
  // floor of kEvalNoise * loss_scale / (2h); quotient differences under the
  // floor mean the quotient has stopped moving at measurement precision,
  // which counts as converged. A kink moves the quotients by a fraction of
  // their own size, orders of magnitude above the floor, so it still fails.
  DerivativeRecord derivative_record(const MaskPoint& point, const MaskPoint& dir,
                                     double order_threshold = 1.9) const {
    DerivativeRecord rec;
    rec.steps = probe_.steps;
    bool any_fallback = false;
    for (double h : probe_.steps) {
      bool fb = false;
      double scale = 0.0;
      rec.quotients.push_back(directional_derivative(point, dir, h, &fb, &scale));
      any_fallback = any_fallback || fb;
      rec.loss_scale = std::max(rec.loss_scale, scale);
    }
    rec.fallback_flagged = any_fallback;

    const std::size_t k = rec.quotients.size();
    double qscale = 0.0;
    for (double q : rec.quotients) qscale = std::max(qscale, std::abs(q));
    constexpr double kEvalNoise = 1e-12;
    const auto qnoise = [&](std::size_t i) {
      return kEvalNoise * rec.loss_scale / (2.0 * rec.steps[i]);
    };

    std::vector<double> orders;
    for (std::size_t i = 0; i + 2 < k; ++i) {
      const double d0 = std::abs(rec.quotients[i] - rec.quotients[i + 1]);
      const double d1 = std::abs(rec.quotients[i + 1] - rec.quotients[i + 2]);
      const double floor1 =
          std::max(qnoise(i + 1) + qnoise(i + 2), 1e-13 * qscale);
      if (d1 <= floor1) {
        orders.push_back(10.0);  // at the noise floor: quotient stopped moving
        continue;
      }
      const double ratio = std::log(std::max(d0, floor1) / d1);
      orders.push_back(ratio / std::log(rec.steps[i] / rec.steps[i + 1]));
    }
    double mean_order = 0.0;
    for (double o : orders) mean_order += o;
    rec.observed_order = orders.empty() ? 10.0 : mean_order / orders.size();

    const double hb = rec.steps[k - 2], hs = rec.steps[k - 1];
    const double qb = rec.quotients[k - 2], qs = rec.quotients[k - 1];
    rec.extrapolated = qs + (qs - qb) * hs * hs / (hb * hb - hs * hs);
    rec.converged = rec.observed_order >= order_threshold;
    return rec;
  }

  // Interior base point: uniform in [0.1, 0.9], mapped to pre-activation
  // space for the sigmoid parametrization.
  MaskPoint sample_point(Rng* rng) const {
    MaskPoint p;
    auto fill = [&](std::optional<MaskTensor>& slot) {
      MaskTensor w =
          MaskTensor::tf(input_.frames, input_.bins, input_.channels);
      for (double& v : w.values) {
        const double u = rng->uniform(0.1, 0.9);
        v = (probe_.param == MaskParam::kSigmoid) ? std::log(u / (1.0 - u)) : u;
      }
      slot = std::move(w);
    };
    if (needs_wpe()) fill(p.wpe);
    if (needs_beamformer()) {
      fill(p.speech);
      fill(p.noise);
    }
    return p;
  }

  // Gaussian direction, unit norm across all carried masks, then scaled so
  // the largest step keeps a direct-parametrized point inside [0.01, 0.99].
  MaskPoint sample_direction(const MaskPoint& point, Rng* rng) const {
    MaskPoint d;
    double sq = 0.0;
    auto fill = [&](const std::optional<MaskTensor>& src,
                    std::optional<MaskTensor>& slot) {
      if (!src) return;
      MaskTensor w = *src;
      for (double& v : w.values) {
        v = rng->gaussian();
        sq += v * v;
      }
      slot = std::move(w);
    };
    fill(point.wpe, d.wpe);
    fill(point.speech, d.speech);
    fill(point.noise, d.noise);
    const double inv = 1.0 / std::max(std::sqrt(sq), 1e-300);
    double max_abs = 0.0;
    auto scale = [&](std::optional<MaskTensor>& slot) {
      if (!slot) return;
      for (double& v : slot->values) {
        v *= inv;
        max_abs = std::max(max_abs, std::abs(v));
      }
    };
    scale(d.wpe);
    scale(d.speech);
    scale(d.noise);

    if (probe_.param != MaskParam::kSigmoid) {
      const double h_max = probe_.steps.front();
      const double cap = 0.09 / std::max(h_max * max_abs, 1e-300);
      if (cap < 1.0) {
        auto shrink = [&](std::optional<MaskTensor>& slot) {
          if (!slot) return;
          for (double& v : slot->values) v *= cap;
        };
        shrink(d.wpe);
        shrink(d.speech);
        shrink(d.noise);
      }
    }
    return d;
  }

 private:
  GraphProbe probe_;
  StftConfig stft_cfg_;
  StftTensor input_;
  StftTensor target_stft_;
  FeatureMatrix target_feats_;
  WpeConfig wpe_cfg_;
  MvdrOptions mvdr_opts_;
  MelConfig mel_cfg_;
};

// n freshly sampled interior (point, direction) pairs on the probe's
// frozen scene; n = 0 yields an empty report.
inline std::vector<DerivativeRecord> smoothness_sweep(const GraphProbe& probe,
                                                      int n_directions) {
  require(n_directions >= 0, "direction count must be >= 0");
  if (n_directions == 0) return {};
  ProbeRunner runner(probe);
  Rng rng(probe.seed ^ 0x5DEECE66Dull);
  std::vector<DerivativeRecord> records;
  records.reserve(static_cast<std::size_t>(n_directions));
  for (int i = 0; i < n_directions; ++i) {
    const MaskPoint point = runner.sample_point(&rng);
    const MaskPoint dir = runner.sample_direction(point, &rng);
    records.push_back(runner.derivative_record(point, dir));
  }
  return records;
}

inline double directional_derivative(const GraphProbe& probe, const MaskPoint& point,
                                     const MaskPoint& dir, double h) {
  ProbeRunner runner(probe);
  return runner.directional_derivative(point, dir, h);
}

}  // namespace farfield
