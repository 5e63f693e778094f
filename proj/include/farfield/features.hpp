// farfield/features.hpp

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
#include "farfield/stft.hpp"

namespace farfield {

struct MelConfig {
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  double sample_rate = 16000.0;
  int fft_size = 512;
  double log_eps = 1e-10;

  void validate() const {
    require(n_mels >= 1, "n_mels must be >= 1");
    require(sample_rate > 0.0, "sample_rate must be positive");
    require(is_power_of_two(fft_size), "fft_size must be a power of two");
    require(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0 + 1e-9,
            "need 0 <= f_min < f_max <= sample_rate/2");
  }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// frames x dims real features; after mvn the removed per-dim statistics are
// kept alongside the data.
struct FeatureMatrix {
  int frames = 0;
  int dims = 0;
  std::vector<double> values;
  std::vector<double> mean;      // filled by mvn
  std::vector<double> variance;  // filled by mvn

  static FeatureMatrix zeros(int frames, int dims) {
    FeatureMatrix f;
    f.frames = frames;
    f.dims = dims;
    f.values.assign(static_cast<std::size_t>(frames) * dims, 0.0);
    return f;
  }

  double& at(int t, int d) { return values[static_cast<std::size_t>(t) * dims + d]; }
  double at(int t, int d) const { return values[static_cast<std::size_t>(t) * dims + d]; }
};

// Triangular filterbank, n_mels x bins. Band edges are n_mels + 2 points
// spaced uniformly on the mel scale between f_min and f_max; filter k ramps
// up from edge k to its peak at edge k+1 (which is also where filter k+1
// starts) and back down to edge k+2, so neighbours overlap by half.
// No area normalization.
inline Eigen::MatrixXd mel_matrix(const MelConfig& cfg) {
  cfg.validate();
  const int bins = cfg.fft_size / 2 + 1;
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  const double mel_lo = hz_to_mel(cfg.f_min);
  const double mel_hi = hz_to_mel(cfg.f_max);
  for (int k = 0; k < cfg.n_mels + 2; ++k)
    edges[static_cast<std::size_t>(k)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * k / (cfg.n_mels + 1));

  Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(cfg.n_mels, bins);
  for (int b = 0; b < bins; ++b) {
    const double f = b * cfg.sample_rate / cfg.fft_size;
    for (int k = 0; k < cfg.n_mels; ++k) {
      const double lo = edges[static_cast<std::size_t>(k)];
      const double mid = edges[static_cast<std::size_t>(k) + 1];
      const double hi = edges[static_cast<std::size_t>(k) + 2];
      double w = 0.0;
      if (f > lo && f < hi)
        w = (f <= mid) ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      if (w > 0.0) mat(k, b) = w;
    }
  }
  return mat;
}

// log(Mel |X| + eps), filterbank applied to the magnitude spectrogram
// (not the power spectrogram). Expects a single-channel tensor.
inline FeatureMatrix logmel(const StftTensor& x, const MelConfig& cfg) {
  x.validate_shape();
  require(x.channels == 1, "logmel expects a single-channel spectrogram");
  require(cfg.fft_size == x.config.fft_size,
          "mel config fft_size must match the tensor");
  const Eigen::MatrixXd mel = mel_matrix(cfg);

  FeatureMatrix f = FeatureMatrix::zeros(x.frames, cfg.n_mels);
  Eigen::VectorXd mag(x.bins);
  for (int t = 0; t < x.frames; ++t) {
    for (int b = 0; b < x.bins; ++b) mag(b) = std::abs(x.at(t, b, 0));
    const Eigen::VectorXd banded = mel * mag;
    for (int k = 0; k < cfg.n_mels; ++k)
      f.at(t, k) = std::log(banded(k) + cfg.log_eps);
  }
  return f;
}

// Per-dimension zero-mean unit-variance over the utterance (population
// variance, standard deviation floored at 1e-8). A one-frame input comes
// out all zero. The removed statistics ride along in the result.
inline FeatureMatrix mvn(const FeatureMatrix& f) {
  require(f.frames >= 1, "cannot normalize an empty feature matrix");
  FeatureMatrix out = f;
  out.mean.assign(static_cast<std::size_t>(f.dims), 0.0);
  out.variance.assign(static_cast<std::size_t>(f.dims), 0.0);
  for (int d = 0; d < f.dims; ++d) {
    double mean = 0.0;
    for (int t = 0; t < f.frames; ++t) mean += f.at(t, d);
    mean /= f.frames;
    double var = 0.0;
    for (int t = 0; t < f.frames; ++t) {
      const double c = f.at(t, d) - mean;
      var += c * c;
    }
    var /= f.frames;
    const double stddev = std::max(std::sqrt(var), 1e-8);
    for (int t = 0; t < f.frames; ++t) out.at(t, d) = (f.at(t, d) - mean) / stddev;
    out.mean[static_cast<std::size_t>(d)] = mean;
    out.variance[static_cast<std::size_t>(d)] = var;
  }
  return out;
}

}  // namespace farfield
