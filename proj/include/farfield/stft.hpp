// farfield/stft.hpp

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

#include <cmath>
#include <cstdint>
#include <vector>

#include "farfield/audio.hpp"
#include "farfield/common.hpp"
#include "farfield/fft.hpp"

namespace farfield {

enum class Window { kSqrtHann, kHann };

struct StftConfig {
  int fft_size = 512;
  int hop = 128;
  Window window = Window::kSqrtHann;
  bool center_pad = true;

  int bins() const { return fft_size / 2 + 1; }

  void validate() const;

  static StftConfig make(int fft_size, int hop, Window window = Window::kSqrtHann,
                         bool center_pad = true) {
    StftConfig cfg;
    cfg.fft_size = fft_size;
    cfg.hop = hop;
    cfg.window = window;
    cfg.center_pad = center_pad;
    cfg.validate();
    return cfg;
  }
};

// Periodic windows, so that shifted copies tile exactly.
inline std::vector<double> make_window(Window window, int n) {
  require(n > 0, "window length must be positive");
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double hann = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
    w[i] = (window == Window::kSqrtHann) ? std::sqrt(hann) : hann;
  }
  return w;
}

// Synthesis pairing: sqrt-hann analysis uses a sqrt-hann synthesis window,
// plain hann analysis uses rectangular synthesis with overlap-add. In both
// cases reconstruction divides by the accumulated analysis*synthesis product.
inline std::vector<double> make_synthesis_window(const StftConfig& cfg) {
  if (cfg.window == Window::kSqrtHann)
    return make_window(Window::kSqrtHann, cfg.fft_size);
  return std::vector<double>(static_cast<std::size_t>(cfg.fft_size), 1.0);
}

// Checks that the analysis*synthesis product window sums to a constant over
// hop-shifted copies (within 1e-10 relative), the condition for the
// overlap-add below to reconstruct the interior exactly. For sqrt-hann the
// product is window squared; for hann it is the window itself.
inline bool validate_cola(const StftConfig& cfg) {
  if (!is_power_of_two(cfg.fft_size) || cfg.hop <= 0 || cfg.hop > cfg.fft_size)
    return false;
  const std::vector<double> wa = make_window(cfg.window, cfg.fft_size);
  const std::vector<double> ws = make_synthesis_window(cfg);
  std::vector<double> acc(static_cast<std::size_t>(cfg.hop), 0.0);
  for (int n = 0; n < cfg.fft_size; ++n) acc[n % cfg.hop] += wa[n] * ws[n];
  double lo = acc[0], hi = acc[0];
  for (double v : acc) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi <= 0.0) return false;
  return (hi - lo) <= 1e-10 * hi;
}

inline void StftConfig::validate() const {
  require(is_power_of_two(fft_size) && fft_size >= 4,
          "fft_size must be a power of two >= 4");
  require(hop > 0 && hop <= fft_size, "hop must be in [1, fft_size]");
  require(validate_cola(*this),
          "window/hop pair does not satisfy the overlap-add condition");
}

// Complex spectrogram, frames x bins x channels, one-sided bins
// (fft_size/2 + 1). Carries its config and sample rate so downstream stages
// and the inverse need no side channel.
struct StftTensor {
  int frames = 0;
  int bins = 0;
  int channels = 0;
  StftConfig config;
  double sample_rate = 0.0;
  std::vector<cplx> data;

  static StftTensor zeros(int frames, int bins, int channels,
                          const StftConfig& cfg, double sample_rate) {
    StftTensor x;
    x.frames = frames;
    x.bins = bins;
    x.channels = channels;
    x.config = cfg;
    x.sample_rate = sample_rate;
    x.data.assign(static_cast<std::size_t>(frames) * bins * channels,
                  cplx(0.0, 0.0));
    return x;
  }

  cplx& at(int t, int b, int m) {
    return data[(static_cast<std::size_t>(t) * bins + b) * channels + m];
  }
  const cplx& at(int t, int b, int m) const {
    return data[(static_cast<std::size_t>(t) * bins + b) * channels + m];
  }

  void validate_shape() const {
    require(frames >= 0 && bins >= 1 && channels >= 1, "bad tensor shape");
    require(bins == config.fft_size / 2 + 1,
            "tensor bins must equal fft_size/2 + 1");
    require(data.size() == static_cast<std::size_t>(frames) * bins * channels,
            "tensor data size does not match shape");
  }
};

inline StftTensor extract_channel(const StftTensor& x, int m) {
  x.validate_shape();
  require(m >= 0 && m < x.channels, "channel index out of range");
  StftTensor out = StftTensor::zeros(x.frames, x.bins, 1, x.config, x.sample_rate);
  for (int t = 0; t < x.frames; ++t)
    for (int b = 0; b < x.bins; ++b) out.at(t, b, 0) = x.at(t, b, m);
  return out;
}

namespace stft_detail {

// Mirror an out-of-range index back into [0, len), reflecting about the
// edges without repeating the edge sample.
inline std::int64_t reflect_index(std::int64_t i, std::int64_t len) {
  if (len == 1) return 0;
  const std::int64_t period = 2 * (len - 1);
  i = ((i % period) + period) % period;
  return (i < len) ? i : period - i;
}

}  // namespace stft_detail

// Analysis transform. With center_pad, each channel is reflect-padded by
// fft_size/2 on both sides and frame t covers padded samples
// [t*hop, t*hop + fft_size). DC and Nyquist imaginary parts are forced to
// exact zero.
inline StftTensor stft(const AudioBuffer& audio, const StftConfig& cfg) {
  cfg.validate();
  audio.validate();
  const int n = cfg.fft_size;
  const int m_ch = audio.num_channels();
  const std::int64_t n_samp = audio.num_samples();
  if (!cfg.center_pad)
    require(n_samp >= n, "signal shorter than one frame with center_pad off");

  const std::int64_t pad = cfg.center_pad ? n / 2 : 0;
  const std::int64_t padded = n_samp + 2 * pad;
  const int frames = static_cast<int>((padded - n) / cfg.hop + 1);
  const int bins = cfg.bins();

  StftTensor out = StftTensor::zeros(frames, bins, m_ch, cfg, audio.sample_rate);
  const std::vector<double> win = make_window(cfg.window, n);
  std::vector<cplx> frame(static_cast<std::size_t>(n));

  for (int m = 0; m < m_ch; ++m) {
    const std::vector<double>& x = audio.channels[m];
    for (int t = 0; t < frames; ++t) {
      const std::int64_t start = static_cast<std::int64_t>(t) * cfg.hop - pad;
      for (int i = 0; i < n; ++i) {
        const std::int64_t src = start + i;
        double v;
        if (src >= 0 && src < n_samp)
          v = x[static_cast<std::size_t>(src)];
        else if (cfg.center_pad)
          v = x[static_cast<std::size_t>(stft_detail::reflect_index(src, n_samp))];
        else
          v = 0.0;
        frame[static_cast<std::size_t>(i)] = cplx(v * win[static_cast<std::size_t>(i)], 0.0);
      }
      fft_inplace(&frame, false);
      for (int b = 0; b < bins; ++b) out.at(t, b, m) = frame[static_cast<std::size_t>(b)];
      out.at(t, 0, m).imag(0.0);
      out.at(t, bins - 1, m).imag(0.0);
    }
  }
  return out;
}

// Weighted overlap-add inverse. Each sample is normalized by the actually
// accumulated analysis*synthesis window mass, so the interior round-trip is
// exact to rounding. With center_pad the fft_size/2 lead-in is trimmed and
// the output is (frames-1)*hop samples long; without it the full
// (frames-1)*hop + fft_size buffer is returned.
inline AudioBuffer istft(const StftTensor& x) {
  x.validate_shape();
  require(x.frames >= 1, "cannot invert a tensor with zero frames");
  require(x.sample_rate > 0.0, "tensor is missing its sample rate");
  const StftConfig& cfg = x.config;
  const int n = cfg.fft_size;
  const std::vector<double> wa = make_window(cfg.window, n);
  const std::vector<double> ws = make_synthesis_window(cfg);

  const std::int64_t full_len =
      static_cast<std::int64_t>(x.frames - 1) * cfg.hop + n;
  std::vector<double> denom(static_cast<std::size_t>(full_len), 0.0);
  for (int t = 0; t < x.frames; ++t) {
    const std::int64_t start = static_cast<std::int64_t>(t) * cfg.hop;
    for (int i = 0; i < n; ++i)
      denom[static_cast<std::size_t>(start + i)] += wa[i] * ws[i];
  }
  double denom_max = 0.0;
  for (double v : denom) denom_max = std::max(denom_max, v);
  require(denom_max > 0.0, "degenerate window");
  const double denom_floor = 1e-8 * denom_max;

  AudioBuffer out;
  out.sample_rate = x.sample_rate;
  out.channels.assign(static_cast<std::size_t>(x.channels),
                      std::vector<double>(static_cast<std::size_t>(full_len), 0.0));
  std::vector<cplx> spec(static_cast<std::size_t>(n));

  for (int m = 0; m < x.channels; ++m) {
    std::vector<double>& y = out.channels[static_cast<std::size_t>(m)];
    for (int t = 0; t < x.frames; ++t) {
      for (int b = 0; b < x.bins; ++b) spec[static_cast<std::size_t>(b)] = x.at(t, b, m);
      for (int b = x.bins; b < n; ++b)
        spec[static_cast<std::size_t>(b)] = std::conj(x.at(t, n - b, m));
      fft_inplace(&spec, true);
      const std::int64_t start = static_cast<std::int64_t>(t) * cfg.hop;
      for (int i = 0; i < n; ++i)
        y[static_cast<std::size_t>(start + i)] += spec[static_cast<std::size_t>(i)].real() * ws[i];
    }
    for (std::int64_t i = 0; i < full_len; ++i) {
      const std::size_t j = static_cast<std::size_t>(i);
      y[j] = (denom[j] > denom_floor) ? y[j] / denom[j] : 0.0;
    }
  }

  if (cfg.center_pad) {
    const std::int64_t trim = n / 2;
    const std::int64_t keep =
        std::max<std::int64_t>(static_cast<std::int64_t>(x.frames - 1) * cfg.hop, 1);
    for (auto& ch : out.channels) {
      std::vector<double> cut(static_cast<std::size_t>(keep), 0.0);
      for (std::int64_t i = 0; i < keep && trim + i < full_len; ++i)
        cut[static_cast<std::size_t>(i)] = ch[static_cast<std::size_t>(trim + i)];
      ch = std::move(cut);
    }
  }
  return out;
}

}  // namespace farfield
