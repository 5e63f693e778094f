// farfield/pipeline.hpp

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

#include <chrono>
#include <optional>
#include <string>

#include "farfield/features.hpp"
#include "farfield/masks.hpp"
#include "farfield/mvdr.hpp"
#include "farfield/stft.hpp"
#include "farfield/wpe.hpp"

namespace farfield {

// Three-stage enhancement chain: dereverberate, beamform, featurize, in
// that order, with any suffix or prefix of stages switched off. This is the
// shared numeric core behind the command line tool and the derivative
// probes; masks arrive already resolved.

enum class WpeStageMode { kIterative, kMask };

struct PipelineStages {
  bool wpe = true;
  bool mvdr = true;
  bool features = true;
};

struct PipelineConfig {
  PipelineStages stages;
  StftConfig stft;
  WpeConfig wpe;
  WpeStageMode wpe_mode = WpeStageMode::kIterative;
  MaskProviderSpec wpe_mask;
  MaskProviderSpec speech_mask{MaskProvider::kOracleIrm};
  MaskProviderSpec noise_mask{MaskProvider::kOracleIrm};
  MaskKind beamform_mask_kind = MaskKind::kTf;
  MvdrOptions mvdr;
  MelConfig mel;
  double skip_wpe_probability = 0.0;  // per-utterance A/B skipping
  std::uint64_t seed = 0;
};

struct StageOutputs {
  StftTensor input;
  std::optional<StftTensor> dereverberated;
  std::optional<StftTensor> beamformed;
  std::optional<FeatureMatrix> features;
  WpeDiagnostics wpe_diag;
  MvdrDiagnostics mvdr_diag;
  double ms_wpe = 0.0, ms_mvdr = 0.0, ms_features = 0.0;

  const StftTensor& last_tensor() const {
    if (beamformed) return *beamformed;
    if (dereverberated) return *dereverberated;
    return input;
  }
};

namespace pipeline_detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   t0)
      .count();
}

}  // namespace pipeline_detail

// Runs the enabled stages on a spectrogram. wpe_mask is only consulted in
// mask mode, speech/noise masks only when the beamformer runs; the feature
// stage consumes the beamformed channel, or channel 0 of whatever came
// before it when the beamformer is off.
inline StageOutputs run_pipeline(const StftTensor& y, const PipelineConfig& cfg,
                                 const MaskTensor* wpe_mask,
                                 const MaskTensor* speech_mask,
                                 const MaskTensor* noise_mask) {
  y.validate_shape();
  StageOutputs out;
  out.input = y;

  const StftTensor* cur = &out.input;
  if (cfg.stages.wpe) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.wpe_mode == WpeStageMode::kMask) {
      require(wpe_mask != nullptr, "mask-mode dereverberation needs a mask");
      out.dereverberated = wpe_oneshot(*cur, *wpe_mask, cfg.wpe, &out.wpe_diag);
    } else {
      out.dereverberated = wpe_iterative(*cur, cfg.wpe, &out.wpe_diag);
    }
    out.ms_wpe = pipeline_detail::ms_since(t0);
    cur = &*out.dereverberated;
  }

  if (cfg.stages.mvdr) {
    require(speech_mask != nullptr && noise_mask != nullptr,
            "beamforming needs speech and noise masks");
    const auto t0 = std::chrono::steady_clock::now();
    out.beamformed =
        mvdr_pipeline(*cur, *speech_mask, *noise_mask, cfg.mvdr, &out.mvdr_diag);
    out.ms_mvdr = pipeline_detail::ms_since(t0);
    cur = &*out.beamformed;
  }

  if (cfg.stages.features) {
    const auto t0 = std::chrono::steady_clock::now();
    MelConfig mel = cfg.mel;
    mel.fft_size = cur->config.fft_size;
    mel.sample_rate = cur->sample_rate;
    if (mel.f_max > cur->sample_rate / 2.0) mel.f_max = cur->sample_rate / 2.0;
    const StftTensor mono = (cur->channels == 1) ? *cur : extract_channel(*cur, 0);
    out.features = mvn(logmel(mono, mel));
    out.ms_features = pipeline_detail::ms_since(t0);
  }
  return out;
}

}  // namespace farfield
