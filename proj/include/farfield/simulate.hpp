// farfield/simulate.hpp

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
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "farfield/audio.hpp"
#include "farfield/common.hpp"
#include "farfield/fft.hpp"
#include "farfield/rng.hpp"
#include "farfield/stft.hpp"

namespace farfield {

// Synthetic far-field scenes: a dry speech-like source, exponential-decay
// room responses per channel, and additive noise calibrated to a target SNR
// over speech-active frames. Everything is driven by one seed, and a given
// seed reproduces every sample bit for bit.

struct RirConfig {
  double t60 = 0.5;             // seconds; 0 gives a pure direct path
  int direct_delay_spread = 4;  // samples of per-channel delay jitter
  double tail_density = 1.0;    // fraction of tail taps that are nonzero
};

enum class NoiseKind { kWhite, kDiffuseLowpass };

struct NoiseConfig {
  NoiseKind kind = NoiseKind::kWhite;
  // target SNR over speech-active frames; +inf disables noise entirely
  double snr_db = 20.0;
};

enum class SourceKind { kSpeechlike, kFile };

struct SourceConfig {
  SourceKind kind = SourceKind::kSpeechlike;
  std::string path;  // kFile: mono wav at the scene sample rate
};

struct SceneConfig {
  std::uint64_t seed = 0;
  int channels = 2;
  double duration = 2.0;  // seconds, for the speechlike source
  double sample_rate = 16000.0;
  RirConfig rir;
  NoiseConfig noise;
  SourceConfig source;
  // frame grid for the activity labels
  int label_frame = 512;
  int label_hop = 128;

  void validate() const {
    require(channels >= 1, "scene needs at least one channel");
    require(sample_rate > 0.0, "scene sample_rate must be positive");
    require(source.kind == SourceKind::kFile || duration > 0.0,
            "scene duration must be positive");
    require(rir.t60 >= 0.0, "t60 must be >= 0");
    require(rir.direct_delay_spread >= 0, "direct_delay_spread must be >= 0");
    require(rir.tail_density > 0.0 && rir.tail_density <= 1.0,
            "tail_density must be in (0, 1]");
    require(label_frame >= 1 && label_hop >= 1, "bad label frame grid");
  }
};

struct SceneBundle {
  SceneConfig config;
  AudioBuffer dry;  // single channel
  std::vector<std::vector<double>> rirs;
  std::vector<int> direct_delays;  // samples, per channel
  AudioBuffer reverberant;         // speech image at the array
  AudioBuffer noise;               // scaled noise, zeros when disabled
  AudioBuffer observed;            // reverberant + noise
  std::vector<std::uint8_t> activity;  // per label frame
  double achieved_snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed_source = 0, seed_rir = 0, seed_noise = 0;
};

namespace sim_detail {

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over (seed, stream) so sibling streams never collide
  std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace sim_detail

// Direct path of unit amplitude at a per-channel delay, followed by a
// Gaussian tail whose POWER decays as exp(-6.9 t / t60), i.e. 30 dB per
// t60. Tail gain is set so the expected tail energy equals the direct-path
// energy. tail_density thins the tail to sparse taps at constant expected
// energy.
inline std::vector<std::vector<double>> synth_rir(const RirConfig& cfg, int channels,
                                                  double sample_rate, Rng* rng,
                                                  std::vector<int>* delays_out = nullptr) {
  require(channels >= 1, "need at least one channel");
  require(sample_rate > 0.0, "sample_rate must be positive");
  const int base_delay = 16;
  std::vector<int> delays(static_cast<std::size_t>(channels));
  for (int m = 0; m < channels; ++m)
    delays[static_cast<std::size_t>(m)] =
        base_delay + (cfg.direct_delay_spread > 0
                          ? rng->uniform_int(0, cfg.direct_delay_spread)
                          : 0);

  const int tail_len =
      (cfg.t60 > 0.0) ? static_cast<int>(std::ceil(1.5 * cfg.t60 * sample_rate)) : 0;
  const int max_delay = *std::max_element(delays.begin(), delays.end());
  const int rir_len = max_delay + tail_len + 1;

  // normalize expected tail energy to the unit direct path
  double tail_energy = 0.0;
  for (int k = 1; k <= tail_len; ++k)
    tail_energy += std::exp(-6.9 * k / (cfg.t60 * sample_rate));
  const double sigma0 = (tail_len > 0) ? std::sqrt(1.0 / tail_energy) : 0.0;

  std::vector<std::vector<double>> rirs(
      static_cast<std::size_t>(channels),
      std::vector<double>(static_cast<std::size_t>(rir_len), 0.0));
  for (int m = 0; m < channels; ++m) {
    std::vector<double>& h = rirs[static_cast<std::size_t>(m)];
    const int d = delays[static_cast<std::size_t>(m)];
    h[static_cast<std::size_t>(d)] = 1.0;
    for (int k = 1; k <= tail_len && d + k < rir_len; ++k) {
      const bool keep = cfg.tail_density >= 1.0 || rng->uniform() < cfg.tail_density;
      const double g = rng->gaussian();  // always draw, keeps streams aligned
      if (!keep) continue;
      const double env = std::exp(-3.45 * k / (cfg.t60 * sample_rate));
      h[static_cast<std::size_t>(d + k)] =
          g * sigma0 * env / std::sqrt(cfg.tail_density);
    }
  }
  if (delays_out != nullptr) *delays_out = delays;
  return rirs;
}

// Amplitude-modulated filtered noise bursts with hard pauses: crude but it
// has the two properties the pipeline cares about, a speech-shaped spectrum
// and distinct active/inactive stretches.
inline std::vector<double> make_speechlike(double duration, double sample_rate,
                                           Rng* rng) {
  const std::int64_t n = std::llround(duration * sample_rate);
  require(n > 0, "speechlike source needs positive duration");
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  const double lp = std::exp(-2.0 * kPi * 900.0 / sample_rate);
  const int ramp = static_cast<int>(0.01 * sample_rate);

  std::int64_t pos = 0;
  bool active = true;
  while (pos < n) {
    const double seg_dur = active ? rng->uniform(0.15, 0.40) : rng->uniform(0.08, 0.20);
    const std::int64_t seg_len =
        std::min<std::int64_t>(std::llround(seg_dur * sample_rate), n - pos);
    if (active) {
      const double am_hz = rng->uniform(2.0, 8.0);
      const double am_phase = rng->uniform(0.0, 2.0 * kPi);
      const double gain = rng->uniform(0.05, 0.12);
      double state = 0.0;
      for (std::int64_t i = 0; i < seg_len; ++i) {
        state = lp * state + (1.0 - lp) * rng->gaussian();
        double env = 0.4 + 0.6 * (0.5 - 0.5 * std::cos(2.0 * kPi * am_hz *
                                                           (pos + i) / sample_rate +
                                                       am_phase));
        if (i < ramp) env *= 0.5 - 0.5 * std::cos(kPi * i / ramp);
        if (seg_len - 1 - i < ramp)
          env *= 0.5 - 0.5 * std::cos(kPi * (seg_len - 1 - i) / ramp);
        x[static_cast<std::size_t>(pos + i)] = gain * env * state * 8.0;
      }
    }
    pos += seg_len;
    active = !active;
  }

  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : x) v *= 0.5 / peak;
  return x;
}

namespace sim_detail {

inline std::vector<double> frame_energies(const std::vector<double>& x, int frame,
                                          int hop) {
  std::vector<double> e;
  if (static_cast<std::int64_t>(x.size()) < frame) return e;
  const std::int64_t frames = (static_cast<std::int64_t>(x.size()) - frame) / hop + 1;
  e.resize(static_cast<std::size_t>(frames));
  for (std::int64_t t = 0; t < frames; ++t) {
    double acc = 0.0;
    for (int i = 0; i < frame; ++i) {
      const double v = x[static_cast<std::size_t>(t * hop + i)];
      acc += v * v;
    }
    e[static_cast<std::size_t>(t)] = acc;
  }
  return e;
}

}  // namespace sim_detail

// Renders the full bundle: dry source, per-channel convolution, activity
// labels from the dry signal, then per-channel noise scaled so that the SNR
// measured over active frames hits the target exactly.
inline SceneBundle render_scene(const SceneConfig& cfg) {
  cfg.validate();
  SceneBundle scene;
  scene.config = cfg;
  scene.seed_source = sim_detail::sub_seed(cfg.seed, 0);
  scene.seed_rir = sim_detail::sub_seed(cfg.seed, 1);
  scene.seed_noise = sim_detail::sub_seed(cfg.seed, 2);

  // dry source
  scene.dry.sample_rate = cfg.sample_rate;
  if (cfg.source.kind == SourceKind::kSpeechlike) {
    Rng rng(scene.seed_source);
    scene.dry.channels.push_back(make_speechlike(cfg.duration, cfg.sample_rate, &rng));
  } else {
    AudioBuffer src = read_wav(cfg.source.path);
    if (src.sample_rate != cfg.sample_rate)
      fail("source file sample rate does not match the scene: " + cfg.source.path);
    scene.dry.channels.push_back(src.channels[0]);
  }
  const std::vector<double>& dry = scene.dry.channels[0];
  const std::int64_t n = static_cast<std::int64_t>(dry.size());

  // room responses and the speech image
  {
    Rng rng(scene.seed_rir);
    scene.rirs = synth_rir(cfg.rir, cfg.channels, cfg.sample_rate, &rng,
                           &scene.direct_delays);
  }
  scene.reverberant.sample_rate = cfg.sample_rate;
  for (int m = 0; m < cfg.channels; ++m) {
    std::vector<double> conv = fft_convolve(dry, scene.rirs[static_cast<std::size_t>(m)]);
    conv.resize(static_cast<std::size_t>(n), 0.0);  // keep the dry length
    scene.reverberant.channels.push_back(std::move(conv));
  }

  // activity labels from dry frame energy, -40 dB below the loudest frame
  const std::vector<double> dry_e =
      sim_detail::frame_energies(dry, cfg.label_frame, cfg.label_hop);
  double peak_e = 0.0;
  for (double e : dry_e) peak_e = std::max(peak_e, e);
  scene.activity.resize(dry_e.size());
  for (std::size_t t = 0; t < dry_e.size(); ++t)
    scene.activity[t] = (dry_e[t] > 1e-4 * peak_e) ? 1 : 0;

  // noise, scaled per channel to the target active-frame SNR
  scene.noise.sample_rate = cfg.sample_rate;
  scene.observed.sample_rate = cfg.sample_rate;
  const bool no_noise = std::isinf(cfg.noise.snr_db) && cfg.noise.snr_db > 0.0;
  Rng rng(scene.seed_noise);
  for (int m = 0; m < cfg.channels; ++m) {
    std::vector<double> nz(static_cast<std::size_t>(n), 0.0);
    if (!no_noise) {
      if (cfg.noise.kind == NoiseKind::kWhite) {
        for (double& v : nz) v = rng.gaussian();
      } else {
        const double a = std::exp(-2.0 * kPi * 1000.0 / cfg.sample_rate);
        double state = 0.0;
        for (double& v : nz) {
          state = a * state + (1.0 - a) * rng.gaussian();
          v = state;
        }
      }
      // energies over active frames only
      const std::vector<double>& rev = scene.reverberant.channels[static_cast<std::size_t>(m)];
      const std::vector<double> rev_e =
          sim_detail::frame_energies(rev, cfg.label_frame, cfg.label_hop);
      const std::vector<double> nz_e =
          sim_detail::frame_energies(nz, cfg.label_frame, cfg.label_hop);
      double es = 0.0, en = 0.0;
      for (std::size_t t = 0; t < scene.activity.size() && t < rev_e.size(); ++t) {
        if (!scene.activity[t]) continue;
        es += rev_e[t];
        en += nz_e[t];
      }
      if (es <= 0.0 || en <= 0.0)
        fail("scene has no active speech frames to calibrate noise against");
      const double scale = std::sqrt(es / (en * std::pow(10.0, cfg.noise.snr_db / 10.0)));
      for (double& v : nz) v *= scale;
      scene.achieved_snr_db = cfg.noise.snr_db;
    }
    scene.noise.channels.push_back(std::move(nz));
    std::vector<double> obs = scene.reverberant.channels[static_cast<std::size_t>(m)];
    const std::vector<double>& nzr = scene.noise.channels.back();
    for (std::size_t i = 0; i < obs.size(); ++i) obs[i] += nzr[i];
    scene.observed.channels.push_back(std::move(obs));
  }
  return scene;
}

// Speech image with the tail removed: the dry source shifted by each
// channel's direct-path delay. This is the clean target the dereverberation
// stage is trying to recover.
inline AudioBuffer direct_path_image(const AudioBuffer& dry,
                                     const std::vector<int>& delays) {
  dry.validate();
  require(!delays.empty(), "need at least one delay");
  const std::vector<double>& x = dry.channels[0];
  AudioBuffer out;
  out.sample_rate = dry.sample_rate;
  for (int d : delays) {
    require(d >= 0, "delays must be >= 0");
    std::vector<double> y(x.size(), 0.0);
    for (std::size_t i = static_cast<std::size_t>(d); i < x.size(); ++i)
      y[i] = x[i - static_cast<std::size_t>(d)];
    out.channels.push_back(std::move(y));
  }
  return out;
}

// Mean squared difference of magnitude spectrograms. A single-channel
// reference broadcasts against a multichannel estimate and vice versa.
inline double metric_stft_mse(const StftTensor& est, const StftTensor& ref) {
  est.validate_shape();
  ref.validate_shape();
  require(est.frames == ref.frames && est.bins == ref.bins,
          "spectrogram shapes must match");
  require(est.channels == ref.channels || est.channels == 1 || ref.channels == 1,
          "channel counts must match or broadcast");
  const int m_out = std::max(est.channels, ref.channels);
  double acc = 0.0;
  for (int t = 0; t < est.frames; ++t)
    for (int b = 0; b < est.bins; ++b)
      for (int m = 0; m < m_out; ++m) {
        const double a = std::abs(est.at(t, b, std::min(m, est.channels - 1)));
        const double r = std::abs(ref.at(t, b, std::min(m, ref.channels - 1)));
        acc += (a - r) * (a - r);
      }
  return acc / (static_cast<double>(est.frames) * est.bins * m_out);
}

namespace sim_detail {

// Align s against dry (lag of s relative to dry in [-max_lag, max_lag]),
// project onto dry, and return 10 log10(coherent / residual), clamped to
// +-60 dB. Throws when the correlation peak is too weak to trust.
inline double coherent_ratio_db(const std::vector<double>& s,
                                const std::vector<double>& dry, int max_lag) {
  require(!s.empty() && !dry.empty(), "empty signal in alignment");
  std::vector<double> rev_dry(dry.rbegin(), dry.rend());
  const std::vector<double> corr = fft_convolve(s, rev_dry);
  // corr index k corresponds to lag k - (len(dry) - 1)
  const std::int64_t zero = static_cast<std::int64_t>(dry.size()) - 1;
  double best = 0.0;
  std::int64_t best_lag = 0;
  for (std::int64_t lag = -max_lag; lag <= max_lag; ++lag) {
    const std::int64_t k = zero + lag;
    if (k < 0 || k >= static_cast<std::int64_t>(corr.size())) continue;
    const double c = std::abs(corr[static_cast<std::size_t>(k)]);
    if (c > best) {
      best = c;
      best_lag = lag;
    }
  }
  double es = 0.0, ed = 0.0;
  for (double v : s) es += v * v;
  for (double v : dry) ed += v * v;
  if (best * best <= 1e-12 * es * ed)
    fail("alignment failed: no usable correlation between signal and reference");

  // overlap region after shifting s back by best_lag
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < dry.size(); ++i) {
    const std::int64_t j = static_cast<std::int64_t>(i) + best_lag;
    if (j < 0 || j >= static_cast<std::int64_t>(s.size())) continue;
    num += s[static_cast<std::size_t>(j)] * dry[i];
    den += dry[i] * dry[i];
  }
  if (den <= 0.0) fail("alignment failed: silent reference");
  const double alpha = num / den;
  double coh = 0.0, res = 0.0;
  for (std::size_t i = 0; i < dry.size(); ++i) {
    const std::int64_t j = static_cast<std::int64_t>(i) + best_lag;
    if (j < 0 || j >= static_cast<std::int64_t>(s.size())) continue;
    const double c = alpha * dry[i];
    const double r = s[static_cast<std::size_t>(j)] - c;
    coh += c * c;
    res += r * r;
  }
  if (coh <= 0.0) return -60.0;
  if (res <= 1e-12 * coh) return 60.0;
  return std::clamp(10.0 * std::log10(coh / res), -60.0, 60.0);
}

}  // namespace sim_detail

// Direct-to-residual improvement of enhanced over observed, both measured
// against the dry reference on channel 0. Positive means the enhanced
// signal is closer to a scaled, shifted copy of the dry source.
inline double metric_drr_gain(const AudioBuffer& enhanced, const AudioBuffer& observed,
                              const AudioBuffer& dry, int max_lag) {
  enhanced.validate();
  observed.validate();
  dry.validate();
  const double r_enh =
      sim_detail::coherent_ratio_db(enhanced.channels[0], dry.channels[0], max_lag);
  const double r_obs =
      sim_detail::coherent_ratio_db(observed.channels[0], dry.channels[0], max_lag);
  return r_enh - r_obs;
}

// Segmental SNR of enhanced against a clean image, mean over active frames
// (clean frame energy within 40 dB of its peak), each frame clamped to
// [-10, 35] dB.
inline double metric_segsnr(const AudioBuffer& enhanced, const AudioBuffer& clean,
                            int frame_len) {
  enhanced.validate();
  clean.validate();
  require(frame_len >= 1, "frame_len must be >= 1");
  const std::vector<double>& e = enhanced.channels[0];
  const std::vector<double>& c = clean.channels[0];
  const std::int64_t len = std::min(e.size(), c.size());
  const std::int64_t frames = len / frame_len;
  require(frames >= 1, "signals shorter than one segmental frame");

  std::vector<double> ce(static_cast<std::size_t>(frames), 0.0);
  double peak = 0.0;
  for (std::int64_t t = 0; t < frames; ++t) {
    double acc = 0.0;
    for (int i = 0; i < frame_len; ++i) {
      const double v = c[static_cast<std::size_t>(t * frame_len + i)];
      acc += v * v;
    }
    ce[static_cast<std::size_t>(t)] = acc;
    peak = std::max(peak, acc);
  }
  require(peak > 0.0, "clean reference is silent");

  double total = 0.0;
  int active = 0;
  for (std::int64_t t = 0; t < frames; ++t) {
    if (ce[static_cast<std::size_t>(t)] <= 1e-4 * peak) continue;
    double err = 0.0;
    for (int i = 0; i < frame_len; ++i) {
      const double d = e[static_cast<std::size_t>(t * frame_len + i)] -
                       c[static_cast<std::size_t>(t * frame_len + i)];
      err += d * d;
    }
    double snr;
    if (err <= 0.0)
      snr = 35.0;
    else
      snr = std::clamp(10.0 * std::log10(ce[static_cast<std::size_t>(t)] / err), -10.0,
                       35.0);
    total += snr;
    ++active;
  }
  require(active > 0, "no active frames in the clean reference");
  return total / active;
}

}  // namespace farfield
