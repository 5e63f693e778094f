// tests/oracles.hpp

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

// Naive reference implementations used as oracles: direct O(n^2) DFT,
// Gauss-Jordan solves, loop-based dereverberation and beamforming. They
// share only container types with the library under test; every numeric
// path here is written from the formulas with plain loops, so agreement is
// evidence, not tautology.

#include <cmath>
#include <complex>
#include <vector>

#include "farfield/masks.hpp"
#include "farfield/stft.hpp"

namespace oracle {

using cplx = std::complex<double>;

inline std::vector<cplx> naive_dft(const std::vector<cplx>& x, bool inverse = false) {
  const std::size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cplx> out(n, cplx(0.0, 0.0));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = sign * 2.0 * M_PI * static_cast<double>(k * j) / n;
      out[k] += x[j] * cplx(std::cos(ang), std::sin(ang));
    }
  if (inverse)
    for (cplx& v : out) v /= static_cast<double>(n);
  return out;
}

inline std::vector<double> naive_convolve(const std::vector<double>& a,
                                          const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// Gauss-Jordan with partial pivoting on an augmented system A | B.
// Column count of B is arbitrary, so the same routine does solves and
// inverses.
inline std::vector<std::vector<cplx>> gauss_jordan(
    std::vector<std::vector<cplx>> a, std::vector<std::vector<cplx>> b) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    const cplx d = a[col][col];
    for (std::size_t c = 0; c < n; ++c) a[col][c] /= d;
    for (std::size_t c = 0; c < b[col].size(); ++c) b[col][c] /= d;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const cplx f = a[r][col];
      if (f == cplx(0.0, 0.0)) continue;
      for (std::size_t c = 0; c < n; ++c) a[r][c] -= f * a[col][c];
      for (std::size_t c = 0; c < b[r].size(); ++c) b[r][c] -= f * b[col][c];
    }
  }
  return b;
}

inline std::vector<cplx> gauss_solve(const std::vector<std::vector<cplx>>& a,
                                     const std::vector<cplx>& rhs) {
  std::vector<std::vector<cplx>> b(rhs.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) b[i] = {rhs[i]};
  const auto x = gauss_jordan(a, b);
  std::vector<cplx> out(rhs.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) out[i] = x[i][0];
  return out;
}

inline std::vector<std::vector<cplx>> gauss_inverse(
    const std::vector<std::vector<cplx>>& a) {
  const std::size_t n = a.size();
  std::vector<std::vector<cplx>> eye(n, std::vector<cplx>(n, cplx(0.0, 0.0)));
  for (std::size_t i = 0; i < n; ++i) eye[i][i] = cplx(1.0, 0.0);
  return gauss_jordan(a, eye);
}

// ---- dereverberation ----

// Per-channel prediction filters, one (M*L) x M matrix per bin, plus the
// dereverberated tensor. Mirrors the documented algorithm with plain loops:
// stack entry i = m*L + l holds y(t - delay - l, b, m) with zero fill.
struct NaiveWpeResult {
  farfield::StftTensor output;
  // filters[b][i][m]
  std::vector<std::vector<std::vector<cplx>>> filters;
};

inline std::vector<cplx> naive_stack(const farfield::StftTensor& y, int t, int b,
                                     int delay, int order) {
  std::vector<cplx> s(static_cast<std::size_t>(y.channels) * order, cplx(0.0, 0.0));
  for (int m = 0; m < y.channels; ++m)
    for (int l = 0; l < order; ++l) {
      const int src = t - delay - l;
      if (src >= 0)
        s[static_cast<std::size_t>(m) * order + l] = y.at(src, b, m);
    }
  return s;
}

inline double naive_mean_power(const farfield::StftTensor& x) {
  double acc = 0.0;
  for (const cplx& v : x.data) acc += std::norm(v);
  return x.data.empty() ? 0.0 : acc / static_cast<double>(x.data.size());
}

// lambda from a desired-signal estimate: channel-mean power, floored.
inline std::vector<double> naive_variance(const farfield::StftTensor& d,
                                          double floor_abs) {
  std::vector<double> lam(static_cast<std::size_t>(d.frames) * d.bins);
  for (int t = 0; t < d.frames; ++t)
    for (int b = 0; b < d.bins; ++b) {
      double acc = 0.0;
      for (int m = 0; m < d.channels; ++m) acc += std::norm(d.at(t, b, m));
      lam[static_cast<std::size_t>(t) * d.bins + b] =
          std::max(acc / d.channels, floor_abs);
    }
  return lam;
}

inline std::vector<double> naive_variance_masked(const farfield::MaskTensor& w,
                                                 const farfield::StftTensor& y,
                                                 double floor_abs) {
  std::vector<double> lam(static_cast<std::size_t>(y.frames) * y.bins);
  for (int t = 0; t < y.frames; ++t)
    for (int b = 0; b < y.bins; ++b) {
      double acc = 0.0;
      for (int m = 0; m < y.channels; ++m)
        acc += w.at(t, b, m) * std::norm(y.at(t, b, m));
      lam[static_cast<std::size_t>(t) * y.bins + b] =
          std::max(acc / y.channels, floor_abs);
    }
  return lam;
}

// One weighted least-squares solve per bin followed by filter application.
inline NaiveWpeResult naive_wpe_pass(const farfield::StftTensor& y,
                                     const std::vector<double>& lam, int delay,
                                     int order, double diag_load) {
  const int dim = y.channels * order;
  NaiveWpeResult res;
  res.output = y;
  res.filters.assign(
      static_cast<std::size_t>(y.bins),
      std::vector<std::vector<cplx>>(static_cast<std::size_t>(dim),
                                     std::vector<cplx>(y.channels, cplx(0, 0))));

  for (int b = 0; b < y.bins; ++b) {
    std::vector<std::vector<cplx>> r(static_cast<std::size_t>(dim),
                                     std::vector<cplx>(dim, cplx(0, 0)));
    std::vector<std::vector<cplx>> p(static_cast<std::size_t>(dim),
                                     std::vector<cplx>(y.channels, cplx(0, 0)));
    for (int t = 0; t < y.frames; ++t) {
      const std::vector<cplx> s = naive_stack(y, t, b, delay, order);
      const double inv_lam = 1.0 / lam[static_cast<std::size_t>(t) * y.bins + b];
      for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j)
          r[i][j] += s[i] * std::conj(s[j]) * inv_lam;
        for (int m = 0; m < y.channels; ++m)
          p[i][m] += s[i] * std::conj(y.at(t, b, m)) * inv_lam;
      }
    }
    // hermitian symmetrization, then relative diagonal loading
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        const cplx v = 0.5 * (r[i][j] + std::conj(r[j][i]));
        r[i][j] = v;
      }
    double tr = 0.0;
    for (int i = 0; i < dim; ++i) tr += r[i][i].real();
    bool finite = std::isfinite(tr);
    for (int i = 0; i < dim && finite; ++i)
      for (int j = 0; j < dim; ++j)
        if (!std::isfinite(r[i][j].real()) || !std::isfinite(r[i][j].imag()))
          finite = false;
    if (!(tr > 0.0) || !finite) continue;  // filters stay zero
    for (int i = 0; i < dim; ++i) r[i][i] += diag_load * tr / dim;

    for (int m = 0; m < y.channels; ++m) {
      std::vector<cplx> rhs(static_cast<std::size_t>(dim));
      for (int i = 0; i < dim; ++i) rhs[i] = p[i][m];
      const std::vector<cplx> g = gauss_solve(r, rhs);
      bool ok = true;
      for (const cplx& v : g)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) ok = false;
      if (!ok) continue;
      for (int i = 0; i < dim; ++i) res.filters[b][i][m] = g[i];
    }
  }

  for (int t = 0; t < y.frames; ++t)
    for (int b = 0; b < y.bins; ++b) {
      const std::vector<cplx> s = naive_stack(y, t, b, delay, order);
      for (int m = 0; m < y.channels; ++m) {
        cplx pred(0.0, 0.0);
        for (int i = 0; i < dim; ++i)
          pred += std::conj(res.filters[b][i][m]) * s[i];
        res.output.at(t, b, m) = y.at(t, b, m) - pred;
      }
    }
  return res;
}

inline farfield::StftTensor naive_wpe_iterative(const farfield::StftTensor& y,
                                                int order, int delay,
                                                int iterations,
                                                double variance_floor,
                                                double diag_load) {
  const double floor_abs =
      std::max(variance_floor * naive_mean_power(y), 1e-300);
  farfield::StftTensor d = y;
  for (int it = 0; it < iterations; ++it) {
    const std::vector<double> lam = naive_variance(d, floor_abs);
    d = naive_wpe_pass(y, lam, delay, order, diag_load).output;
  }
  return d;
}

inline farfield::StftTensor naive_wpe_oneshot(const farfield::StftTensor& y,
                                              const farfield::MaskTensor& w,
                                              int order, int delay,
                                              double variance_floor,
                                              double diag_load) {
  const double floor_abs =
      std::max(variance_floor * naive_mean_power(y), 1e-300);
  const std::vector<double> lam = naive_variance_masked(w, y, floor_abs);
  return naive_wpe_pass(y, lam, delay, order, diag_load).output;
}

// ---- beamforming ----

// Masked outer-product accumulation for one bin.
inline std::vector<std::vector<cplx>> naive_psd_bin(const farfield::StftTensor& d,
                                                    const farfield::MaskTensor& w,
                                                    int b, bool normalize) {
  const int m_ch = d.channels;
  std::vector<std::vector<cplx>> phi(static_cast<std::size_t>(m_ch),
                                     std::vector<cplx>(m_ch, cplx(0, 0)));
  double mass = 0.0;
  for (int t = 0; t < d.frames; ++t) {
    const double wv = w.at(t, b, 0);
    mass += wv;
    if (wv == 0.0) continue;
    for (int i = 0; i < m_ch; ++i)
      for (int j = 0; j < m_ch; ++j)
        phi[i][j] += wv * d.at(t, b, i) * std::conj(d.at(t, b, j));
  }
  if (normalize && mass > 0.0)
    for (auto& row : phi)
      for (cplx& v : row) v /= mass;
  for (int i = 0; i < m_ch; ++i)
    for (int j = i; j < m_ch; ++j) {
      const cplx v = 0.5 * (phi[i][j] + std::conj(phi[j][i]));
      phi[i][j] = v;
      phi[j][i] = std::conj(v);
    }
  return phi;
}

// Dense-inverse reference for the beamformer weights at one bin:
// f = (Phi_N^-1 Phi_S / tr(Phi_N^-1 Phi_S)) u, with relative loading on the
// noise matrix first.
inline std::vector<cplx> naive_mvdr_bin(std::vector<std::vector<cplx>> phi_n,
                                        const std::vector<std::vector<cplx>>& phi_s,
                                        const std::vector<double>& u,
                                        double diag_load) {
  const std::size_t m = phi_n.size();
  double tr_n = 0.0;
  for (std::size_t i = 0; i < m; ++i) tr_n += phi_n[i][i].real();
  for (std::size_t i = 0; i < m; ++i)
    phi_n[i][i] += diag_load * tr_n / static_cast<double>(m);
  const auto inv = gauss_inverse(phi_n);
  std::vector<std::vector<cplx>> ratio(m, std::vector<cplx>(m, cplx(0, 0)));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k) ratio[i][j] += inv[i][k] * phi_s[k][j];
  cplx tr(0.0, 0.0);
  for (std::size_t i = 0; i < m; ++i) tr += ratio[i][i];
  std::vector<cplx> f(m, cplx(0, 0));
  if (std::abs(tr) < 1e-10 * static_cast<double>(m)) {
    for (std::size_t i = 0; i < m; ++i) f[i] = u[i];
    return f;
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) f[i] += ratio[i][j] * u[j];
    f[i] /= tr;
  }
  return f;
}

// ---- features ----

inline double naive_hz_to_mel(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

inline double naive_mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Independent triangular filterbank construction: n_mels + 2 edges spaced
// uniformly in mel, triangle k rising from edge k to k+1 and falling to
// k+2, evaluated at bin centers b * sr / fft.
inline std::vector<std::vector<double>> naive_mel_weights(int n_mels, int fft,
                                                          double sr, double f_min,
                                                          double f_max) {
  const int bins = fft / 2 + 1;
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  const double m_lo = naive_hz_to_mel(f_min), m_hi = naive_hz_to_mel(f_max);
  for (int k = 0; k < n_mels + 2; ++k)
    edges[static_cast<std::size_t>(k)] =
        naive_mel_to_hz(m_lo + (m_hi - m_lo) * k / (n_mels + 1));
  std::vector<std::vector<double>> w(static_cast<std::size_t>(n_mels),
                                     std::vector<double>(bins, 0.0));
  for (int k = 0; k < n_mels; ++k) {
    const double lo = edges[static_cast<std::size_t>(k)];
    const double mid = edges[static_cast<std::size_t>(k) + 1];
    const double hi = edges[static_cast<std::size_t>(k) + 2];
    for (int b = 0; b < bins; ++b) {
      const double f = b * sr / fft;
      double v = 0.0;
      if (f > lo && f < mid)
        v = (f - lo) / (mid - lo);
      else if (f == mid)
        v = 1.0;
      else if (f > mid && f < hi)
        v = (hi - f) / (hi - mid);
      if (v > 0.0) w[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)] = v;
    }
  }
  return w;
}

}  // namespace oracle
