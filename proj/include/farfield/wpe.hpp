// farfield/wpe.hpp

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

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "farfield/common.hpp"
#include "farfield/masks.hpp"
#include "farfield/stft.hpp"

namespace farfield {

// Long-term linear prediction per frequency bin: the late tail of each
// frame is predicted from frames at least `delay` hops back and subtracted,
// which leaves the direct sound and early reflections untouched. The filter
// is re-estimated from a per-cell variance map, either iteratively from its
// own output or in one shot from a mask.
struct WpeConfig {
  int filter_order = 5;  // taps per channel
  int delay = 3;         // prediction gap in frames
  int iterations = 3;
  double variance_floor = 1e-10;  // relative to mean input power
  double diag_load = 1e-6;        // relative to mean diagonal of R

  void validate() const {
    require(filter_order >= 1, "filter_order must be >= 1");
    require(delay >= 1, "delay must be >= 1");
    require(iterations >= 1, "iterations must be >= 1");
    require(variance_floor > 0.0, "variance_floor must be positive");
    require(diag_load >= 0.0, "diag_load must be >= 0");
  }
};

// lambda(t, b): estimated desired-signal power per cell.
struct VarianceMap {
  int frames = 0;
  int bins = 0;
  std::vector<double> values;

  static VarianceMap zeros(int frames, int bins) {
    VarianceMap v;
    v.frames = frames;
    v.bins = bins;
    v.values.assign(static_cast<std::size_t>(frames) * bins, 0.0);
    return v;
  }

  double& at(int t, int b) { return values[static_cast<std::size_t>(t) * bins + b]; }
  double at(int t, int b) const { return values[static_cast<std::size_t>(t) * bins + b]; }
};

// Delayed context vectors: entry i = m*order + l of the stack at (t, b)
// equals y(t - delay - l, b, m), with zeros where the history runs past the
// start of the utterance. Channel-major, taps inner.
struct StackedTensor {
  int frames = 0;
  int bins = 0;
  int stack_dim = 0;  // channels * order
  std::vector<cplx> data;

  const cplx* at(int t, int b) const {
    return data.data() + (static_cast<std::size_t>(t) * bins + b) * stack_dim;
  }
  cplx* at(int t, int b) {
    return data.data() + (static_cast<std::size_t>(t) * bins + b) * stack_dim;
  }
};

// per-bin prediction filters G(b), stack_dim x channels
struct PredictionFilter {
  std::vector<Eigen::MatrixXcd> g;
  int bins() const { return static_cast<int>(g.size()); }
};

struct WpeDiagnostics {
  int iterations_run = 0;
  int degenerate_bins = 0;
  std::vector<double> filter_norms;  // Frobenius norm per bin
};

inline double mean_power(const StftTensor& x) {
  if (x.data.empty()) return 0.0;
  double acc = 0.0;
  for (const cplx& v : x.data) acc += std::norm(v);
  return acc / static_cast<double>(x.data.size());
}

inline StackedTensor stack_delayed(const StftTensor& y, int delay, int order) {
  y.validate_shape();
  require(delay >= 1 && order >= 1, "delay and order must be >= 1");
  require(y.frames >= delay + 1,
          "utterance too short: needs at least delay+1 frames");
  StackedTensor s;
  s.frames = y.frames;
  s.bins = y.bins;
  s.stack_dim = y.channels * order;
  s.data.assign(static_cast<std::size_t>(y.frames) * y.bins * s.stack_dim,
                cplx(0.0, 0.0));
  for (int t = 0; t < y.frames; ++t)
    for (int b = 0; b < y.bins; ++b) {
      cplx* row = s.at(t, b);
      for (int m = 0; m < y.channels; ++m)
        for (int l = 0; l < order; ++l) {
          const int src = t - delay - l;
          if (src >= 0) row[m * order + l] = y.at(src, b, m);
        }
    }
  return s;
}

// lambda(t, b) = max(mean_m |d(t, b, m)|^2, floor). The floor is an absolute
// power here; callers derive it from the configured relative floor and the
// mean input power.
inline VarianceMap variance_from_signal(const StftTensor& d, double floor_abs) {
  d.validate_shape();
  require(floor_abs > 0.0, "variance floor must be positive");
  VarianceMap v = VarianceMap::zeros(d.frames, d.bins);
  for (int t = 0; t < d.frames; ++t)
    for (int b = 0; b < d.bins; ++b) {
      double acc = 0.0;
      for (int m = 0; m < d.channels; ++m) acc += std::norm(d.at(t, b, m));
      v.at(t, b) = std::max(acc / d.channels, floor_abs);
    }
  return v;
}

// Mask-driven variance: lambda(t, b) = max(mean_m w(t, b, m) |y(t, b, m)|^2,
// floor). A mask of all ones reproduces variance_from_signal on y.
inline VarianceMap variance_from_mask(const MaskTensor& w, const StftTensor& y,
                                      double floor_abs) {
  y.validate_shape();
  w.validate_against(y);
  w.validate_range();
  require(floor_abs > 0.0, "variance floor must be positive");
  VarianceMap v = VarianceMap::zeros(y.frames, y.bins);
  for (int t = 0; t < y.frames; ++t)
    for (int b = 0; b < y.bins; ++b) {
      double acc = 0.0;
      for (int m = 0; m < y.channels; ++m)
        acc += w.at(t, b, m) * std::norm(y.at(t, b, m));
      v.at(t, b) = std::max(acc / y.channels, floor_abs);
    }
  return v;
}

// Per-bin weighted normal equations: R(b) = sum_t ytil ytil^H / lambda,
// P(b) = sum_t ytil y^H / lambda, G(b) = R(b)^-1 P(b) after diagonal
// loading of eps_r * tr(R)/dim. Bins whose loaded R is still unusable (all
// zeros, or a solve that comes back non-finite) get G(b) = 0 and a
// diagnostics count instead of an error.
inline PredictionFilter wpe_normal_equations(const StackedTensor& stack,
                                             const StftTensor& y,
                                             const VarianceMap& lambda,
                                             double eps_r,
                                             WpeDiagnostics* diag = nullptr) {
  require(stack.frames == y.frames && stack.bins == y.bins,
          "stack/tensor shape mismatch");
  require(lambda.frames == y.frames && lambda.bins == y.bins,
          "variance map shape mismatch");
  require(eps_r >= 0.0, "diagonal loading must be >= 0");
  const int dim = stack.stack_dim;
  const int m_ch = y.channels;

  PredictionFilter filt;
  filt.g.resize(static_cast<std::size_t>(y.bins));
  Eigen::MatrixXcd r(dim, dim), p(dim, m_ch);
  Eigen::VectorXcd ytil(dim), yvec(m_ch);

  for (int b = 0; b < y.bins; ++b) {
    r.setZero();
    p.setZero();
    for (int t = 0; t < y.frames; ++t) {
      const double inv_lambda = 1.0 / lambda.at(t, b);
      const cplx* row = stack.at(t, b);
      for (int i = 0; i < dim; ++i) ytil(i) = row[i];
      for (int m = 0; m < m_ch; ++m) yvec(m) = y.at(t, b, m);
      r.noalias() += inv_lambda * (ytil * ytil.adjoint());
      p.noalias() += inv_lambda * (ytil * yvec.adjoint());
    }
    r = 0.5 * (r + r.adjoint().eval());  // keep exactly Hermitian

    Eigen::MatrixXcd& g = filt.g[static_cast<std::size_t>(b)];
    const double trace = r.real().trace();
    if (!(trace > 0.0) || !r.allFinite()) {
      g = Eigen::MatrixXcd::Zero(dim, m_ch);
      if (diag != nullptr) ++diag->degenerate_bins;
      continue;
    }
    r.diagonal().array() += eps_r * trace / dim;
    g = r.ldlt().solve(p);
    if (!g.allFinite()) {
      g.setZero();
      if (diag != nullptr) ++diag->degenerate_bins;
    }
  }
  return filt;
}

// d(t, b) = y(t, b) - G(b)^H ytil(t - delay, b). Frames whose whole history
// precedes the utterance pass through unchanged.
inline StftTensor apply_prediction_filter(const StftTensor& y,
                                          const PredictionFilter& filt,
                                          int delay, int order) {
  y.validate_shape();
  require(filt.bins() == y.bins, "filter bin count mismatch");
  const int dim = y.channels * order;
  for (const auto& g : filt.g)
    require(g.rows() == dim && g.cols() == y.channels,
            "filter matrix shape mismatch");

  StftTensor d = y;
  Eigen::VectorXcd ytil(dim);
  for (int b = 0; b < y.bins; ++b) {
    const Eigen::MatrixXcd gh = filt.g[static_cast<std::size_t>(b)].adjoint();
    for (int t = 0; t < y.frames; ++t) {
      if (t - delay < 0) continue;  // zero history, nothing to subtract
      ytil.setZero();
      for (int m = 0; m < y.channels; ++m)
        for (int l = 0; l < order; ++l) {
          const int src = t - delay - l;
          if (src >= 0) ytil(m * order + l) = y.at(src, b, m);
        }
      const Eigen::VectorXcd pred = gh * ytil;
      for (int m = 0; m < y.channels; ++m) d.at(t, b, m) -= pred(m);
    }
  }
  return d;
}

namespace wpe_detail {

inline StftTensor apply_with_stack(const StftTensor& y, const StackedTensor& stack,
                                   const PredictionFilter& filt) {
  StftTensor d = y;
  const int dim = stack.stack_dim;
  for (int b = 0; b < y.bins; ++b) {
    const Eigen::MatrixXcd gh = filt.g[static_cast<std::size_t>(b)].adjoint();
    for (int t = 0; t < y.frames; ++t) {
      const Eigen::Map<const Eigen::VectorXcd> ytil(stack.at(t, b), dim);
      const Eigen::VectorXcd pred = gh * ytil;
      for (int m = 0; m < y.channels; ++m) d.at(t, b, m) -= pred(m);
    }
  }
  return d;
}

inline void record_filter_norms(const PredictionFilter& filt, WpeDiagnostics* diag) {
  if (diag == nullptr) return;
  diag->filter_norms.clear();
  diag->filter_norms.reserve(filt.g.size());
  for (const auto& g : filt.g) diag->filter_norms.push_back(g.norm());
}

}  // namespace wpe_detail

// Classic alternating estimation: the variance map comes from the previous
// dereverberation result (the observed signal on the first pass), then the
// normal equations are re-solved against the original observation.
inline StftTensor wpe_iterative(const StftTensor& y, const WpeConfig& cfg,
                                WpeDiagnostics* diag = nullptr) {
  cfg.validate();
  y.validate_shape();
  const double floor_abs =
      std::max(cfg.variance_floor * mean_power(y), 1e-300);
  const StackedTensor stack = stack_delayed(y, cfg.delay, cfg.filter_order);

  StftTensor d = y;
  PredictionFilter filt;
  for (int it = 0; it < cfg.iterations; ++it) {
    if (diag != nullptr) diag->degenerate_bins = 0;
    const VarianceMap lambda = variance_from_signal(d, floor_abs);
    filt = wpe_normal_equations(stack, y, lambda, cfg.diag_load, diag);
    d = wpe_detail::apply_with_stack(y, stack, filt);
    if (diag != nullptr) diag->iterations_run = it + 1;
  }
  wpe_detail::record_filter_norms(filt, diag);
  return d;
}

// Single-pass variant where the variance map comes from a mask over the
// observation; with a mask of all ones this equals one iteration of
// wpe_iterative.
inline StftTensor wpe_oneshot(const StftTensor& y, const MaskTensor& w,
                              const WpeConfig& cfg,
                              WpeDiagnostics* diag = nullptr) {
  cfg.validate();
  y.validate_shape();
  const double floor_abs =
      std::max(cfg.variance_floor * mean_power(y), 1e-300);
  const StackedTensor stack = stack_delayed(y, cfg.delay, cfg.filter_order);
  const VarianceMap lambda = variance_from_mask(w, y, floor_abs);
  const PredictionFilter filt =
      wpe_normal_equations(stack, y, lambda, cfg.diag_load, diag);
  StftTensor d = wpe_detail::apply_with_stack(y, stack, filt);
  if (diag != nullptr) diag->iterations_run = 1;
  wpe_detail::record_filter_norms(filt, diag);
  return d;
}

}  // namespace farfield
