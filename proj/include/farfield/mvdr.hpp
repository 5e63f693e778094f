// farfield/mvdr.hpp

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

// Distortionless beamformer built from masked spatial covariances, in the
// formulation that never extracts a steering vector: per bin
// f = (PhiN^-1 PhiS / tr(PhiN^-1 PhiS)) u, with u a reference-channel
// selector. x(t, b) = f(b)^H d(t, b).

enum class PsdRole { kSpeech, kNoise };

// one channels x channels Hermitian matrix per bin
struct PsdMatrix {
  PsdRole role = PsdRole::kSpeech;
  int bins = 0;
  int channels = 0;
  std::vector<Eigen::MatrixXcd> phi;

  void validate_shape() const {
    require(bins >= 1 && channels >= 1, "bad psd shape");
    require(static_cast<int>(phi.size()) == bins, "psd bin count mismatch");
    for (const auto& m : phi)
      require(m.rows() == channels && m.cols() == channels,
              "psd matrix size mismatch");
  }
};

enum class ReferenceMode { kFixed, kSoft };

// Resolved reference weights: one-hot for a fixed microphone, or the soft
// per-channel quality surrogate built from PSD diagonals.
struct ReferenceSpec {
  ReferenceMode mode = ReferenceMode::kFixed;
  int fixed_channel = 0;
  Eigen::VectorXd weights;
};

struct BeamformerFilter {
  std::vector<Eigen::VectorXcd> f;  // per bin, length channels
  int bins() const { return static_cast<int>(f.size()); }
};

struct MvdrDiagnostics {
  int fallback_bins = 0;
  Eigen::VectorXd reference_weights;
  std::vector<double> filter_norms;
};

// Collapses a channel-dependent mask to its channel mean; already averaged
// masks pass through.
inline MaskTensor average_masks(const MaskTensor& w) {
  if (w.channels == 1) return w;
  MaskTensor out = (w.kind == MaskKind::kTf)
                       ? MaskTensor::tf(w.frames, w.bins, 1)
                       : MaskTensor::sad(w.frames, w.bins, 1);
  const int nb = (w.kind == MaskKind::kTf) ? w.bins : 1;
  for (int t = 0; t < w.frames; ++t)
    for (int b = 0; b < nb; ++b) {
      double acc = 0.0;
      for (int m = 0; m < w.channels; ++m) acc += w.at(t, b, m);
      out.ref(t, b, 0) = acc / w.channels;
    }
  return out;
}

// Phi(b) = sum_t w(t, b) d(t, b) d(t, b)^H over all frames, no mask-mass
// normalization. The optional flag divides by sum_t w(t, b) instead, for
// experiments where recordings of very different length are compared.
inline PsdMatrix estimate_psd(const StftTensor& d, const MaskTensor& w,
                              PsdRole role, bool normalize = false) {
  d.validate_shape();
  require(w.channels == 1, "estimate_psd expects a channel-averaged mask");
  w.validate_against(d);
  w.validate_range();

  PsdMatrix psd;
  psd.role = role;
  psd.bins = d.bins;
  psd.channels = d.channels;
  psd.phi.assign(static_cast<std::size_t>(d.bins),
                 Eigen::MatrixXcd::Zero(d.channels, d.channels));

  Eigen::VectorXcd dv(d.channels);
  for (int b = 0; b < d.bins; ++b) {
    Eigen::MatrixXcd& phi = psd.phi[static_cast<std::size_t>(b)];
    double mass = 0.0;
    for (int t = 0; t < d.frames; ++t) {
      const double wv = w.at(t, b, 0);
      if (wv == 0.0) continue;
      for (int m = 0; m < d.channels; ++m) dv(m) = d.at(t, b, m);
      phi.noalias() += wv * (dv * dv.adjoint());
      mass += wv;
    }
    if (normalize && mass > 0.0) phi /= mass;
    phi = 0.5 * (phi + phi.adjoint().eval());
  }
  return psd;
}

// Resolves the reference selector. Soft mode weighs channels by total
// speech-diagonal over total noise-diagonal power, normalized to sum one;
// it degrades to uniform weights when there is nothing to rank by.
inline ReferenceSpec select_reference(ReferenceMode mode, int fixed_channel,
                                      const PsdMatrix& speech,
                                      const PsdMatrix& noise) {
  speech.validate_shape();
  noise.validate_shape();
  require(speech.channels == noise.channels && speech.bins == noise.bins,
          "speech/noise psd shape mismatch");
  const int m_ch = speech.channels;

  ReferenceSpec ref;
  ref.mode = mode;
  ref.fixed_channel = fixed_channel;
  if (mode == ReferenceMode::kFixed) {
    require(fixed_channel >= 0 && fixed_channel < m_ch,
            "fixed reference channel out of range");
    ref.weights = Eigen::VectorXd::Zero(m_ch);
    ref.weights(fixed_channel) = 1.0;
    return ref;
  }

  Eigen::VectorXd s_diag = Eigen::VectorXd::Zero(m_ch);
  Eigen::VectorXd n_diag = Eigen::VectorXd::Zero(m_ch);
  for (int b = 0; b < speech.bins; ++b)
    for (int m = 0; m < m_ch; ++m) {
      s_diag(m) += speech.phi[static_cast<std::size_t>(b)](m, m).real();
      n_diag(m) += noise.phi[static_cast<std::size_t>(b)](m, m).real();
    }
  const double eps = std::max(1e-10 * n_diag.mean(), 1e-300);
  Eigen::VectorXd u(m_ch);
  for (int m = 0; m < m_ch; ++m) u(m) = s_diag(m) / (n_diag(m) + eps);
  const double total = u.sum();
  if (total > 0.0)
    u /= total;
  else
    u.setConstant(1.0 / m_ch);
  ref.weights = u;
  return ref;
}

// Per-bin weights f = (PhiN^-1 PhiS u) / tr(PhiN^-1 PhiS), with relative
// diagonal loading of PhiN before the solve. Bins where the trace collapses
// (no usable speech-vs-noise contrast) or the solve goes non-finite fall
// back to f = u, which passes the reference mix through untouched.
inline BeamformerFilter mvdr_filter(const PsdMatrix& speech, const PsdMatrix& noise,
                                    const ReferenceSpec& ref, double eps_n,
                                    MvdrDiagnostics* diag = nullptr) {
  speech.validate_shape();
  noise.validate_shape();
  require(speech.channels == noise.channels && speech.bins == noise.bins,
          "speech/noise psd shape mismatch");
  require(eps_n >= 0.0, "diagonal loading must be >= 0");
  const int m_ch = speech.channels;
  require(ref.weights.size() == m_ch, "reference weights size mismatch");
  const Eigen::VectorXcd u = ref.weights.cast<cplx>();

  BeamformerFilter filt;
  filt.f.resize(static_cast<std::size_t>(speech.bins));
  if (diag != nullptr) diag->reference_weights = ref.weights;

  for (int b = 0; b < speech.bins; ++b) {
    const Eigen::MatrixXcd& phi_s = speech.phi[static_cast<std::size_t>(b)];
    Eigen::MatrixXcd phi_n = noise.phi[static_cast<std::size_t>(b)];
    Eigen::VectorXcd& f = filt.f[static_cast<std::size_t>(b)];

    const double n_trace = phi_n.real().trace();
    bool ok = (n_trace > 0.0) && phi_n.allFinite() && phi_s.allFinite();
    if (ok) {
      phi_n.diagonal().array() += eps_n * n_trace / m_ch;
      const Eigen::MatrixXcd ratio = phi_n.ldlt().solve(phi_s);
      const cplx trace = ratio.trace();
      ok = ratio.allFinite() && std::abs(trace) >= 1e-10 * m_ch;
      if (ok) f = (ratio * u) / trace;
      ok = ok && f.allFinite();
    }
    if (!ok) {
      f = u;
      if (diag != nullptr) ++diag->fallback_bins;
    }
    if (diag != nullptr) diag->filter_norms.push_back(f.norm());
  }
  return filt;
}

inline StftTensor apply_beamformer(const BeamformerFilter& filt,
                                   const StftTensor& d) {
  d.validate_shape();
  require(filt.bins() == d.bins, "beamformer bin count mismatch");
  StftTensor x = StftTensor::zeros(d.frames, d.bins, 1, d.config, d.sample_rate);
  for (int b = 0; b < d.bins; ++b) {
    const Eigen::VectorXcd& f = filt.f[static_cast<std::size_t>(b)];
    require(f.size() == d.channels, "beamformer filter length mismatch");
    for (int t = 0; t < d.frames; ++t) {
      cplx acc(0.0, 0.0);
      for (int m = 0; m < d.channels; ++m) acc += std::conj(f(m)) * d.at(t, b, m);
      x.at(t, b, 0) = acc;
    }
  }
  return x;
}

struct MvdrOptions {
  ReferenceMode reference_mode = ReferenceMode::kFixed;
  int reference_channel = 0;
  double diag_load = 1e-6;     // relative loading of the noise PSD
  bool normalize_psd = false;  // divide Eq-style sums by mask mass
};

// Mask in, single channel out: average the two masks over channels, build
// both PSDs, resolve the reference, solve the per-bin weights, apply.
inline StftTensor mvdr_pipeline(const StftTensor& d, const MaskTensor& speech_mask,
                                const MaskTensor& noise_mask,
                                const MvdrOptions& opts,
                                MvdrDiagnostics* diag = nullptr) {
  const MaskTensor ws = average_masks(speech_mask);
  const MaskTensor wn = average_masks(noise_mask);
  const PsdMatrix phi_s = estimate_psd(d, ws, PsdRole::kSpeech, opts.normalize_psd);
  const PsdMatrix phi_n = estimate_psd(d, wn, PsdRole::kNoise, opts.normalize_psd);
  const ReferenceSpec ref = select_reference(opts.reference_mode,
                                             opts.reference_channel, phi_s, phi_n);
  const BeamformerFilter filt = mvdr_filter(phi_s, phi_n, ref, opts.diag_load, diag);
  return apply_beamformer(filt, d);
}

}  // namespace farfield
