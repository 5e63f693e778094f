// tools/farfield_main.cpp

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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "farfield/config_io.hpp"
#include "farfield/gradcheck.hpp"
#include "farfield/io.hpp"
#include "farfield/pipeline.hpp"
#include "farfield/simulate.hpp"

namespace {

constexpr const char* kToolVersion = "0.1.0";

namespace ff = farfield;
namespace fs = std::filesystem;
using nlohmann::json;

std::string stem_of(const std::string& input) {
  fs::path p(input);
  if (fs::is_directory(p)) return p.filename().string();
  return p.stem().string();
}

// ---- enhance ----

struct EnhanceArgs {
  std::vector<std::string> inputs;
  std::string config_path;
  std::string output_dir = ".";
  std::string report_path;
};

// What an oracle mask should treat as the desired signal.
enum class MaskRole { kDereverb, kSpeech, kNoise };

struct SceneTensors {
  ff::StftTensor observed;
  ff::StftTensor direct;    // direct-path image of the dry source
  ff::StftTensor residual;  // observed minus the direct image
  ff::StftTensor reverberant;
  ff::StftTensor noise;
};

SceneTensors scene_tensors(const ff::SceneBundle& scene, const ff::StftConfig& cfg) {
  SceneTensors t;
  t.observed = ff::stft(scene.observed, cfg);
  const ff::AudioBuffer direct =
      ff::direct_path_image(scene.dry, scene.direct_delays);
  t.direct = ff::stft(direct, cfg);
  ff::AudioBuffer residual = scene.observed;
  for (std::size_t m = 0; m < residual.channels.size(); ++m)
    for (std::size_t i = 0; i < residual.channels[m].size(); ++i)
      residual.channels[m][i] -= direct.channels[m][i];
  t.residual = ff::stft(residual, cfg);
  t.reverberant = ff::stft(scene.reverberant, cfg);
  t.noise = ff::stft(scene.noise, cfg);
  return t;
}

ff::MaskTensor to_kind(ff::MaskTensor w, ff::MaskKind kind) {
  if (w.kind == kind) return w;
  return kind == ff::MaskKind::kTf ? ff::expand_to_tf(w) : ff::collapse_to_sad(w);
}

// Turns a provider spec into a concrete mask on the observed spectrogram.
// Oracle masks need the scene components, so raw wav inputs reject them.
ff::MaskTensor resolve_mask(const ff::MaskProviderSpec& spec,
                            const ff::StftTensor& y, const SceneTensors* scene,
                            MaskRole role) {
  switch (spec.provider) {
    case ff::MaskProvider::kConstant:
      return ff::constant_mask(y, spec.value);
    case ff::MaskProvider::kEnergySad:
      return ff::energy_sad(y, spec.threshold_db);
    case ff::MaskProvider::kMlp:
      return ff::mlp_infer(ff::MlpWeights::load(spec.weights_path), y);
    case ff::MaskProvider::kOracleIrm: {
      if (scene == nullptr)
        ff::fail("oracle masks need a scene directory input, not a raw wav");
      switch (role) {
        case MaskRole::kDereverb:
          return ff::oracle_irm(scene->direct, scene->residual);
        case MaskRole::kSpeech:
          return ff::oracle_irm(scene->reverberant, scene->noise);
        case MaskRole::kNoise:
          return ff::oracle_irm(scene->noise, scene->reverberant);
      }
    }
  }
  ff::fail("unreachable mask provider");
}

json diag_to_json(const ff::StageOutputs& out) {
  json d;
  json w;
  w["iterations_run"] = out.wpe_diag.iterations_run;
  w["degenerate_bins"] = out.wpe_diag.degenerate_bins;
  d["wpe"] = w;
  json b;
  b["fallback_bins"] = out.mvdr_diag.fallback_bins;
  json ref = json::array();
  for (int i = 0; i < out.mvdr_diag.reference_weights.size(); ++i)
    ref.push_back(out.mvdr_diag.reference_weights[i]);
  b["reference_weights"] = ref;
  d["mvdr"] = b;
  return d;
}

int run_enhance(const EnhanceArgs& args) {
  ff::PipelineConfig cfg;
  if (!args.config_path.empty())
    cfg = ff::pipeline_config_from_json(ff::load_json_file(args.config_path));
  fs::create_directories(args.output_dir);
  const std::string report_path =
      args.report_path.empty() ? args.output_dir + "/report.json" : args.report_path;

  json report;
  report["schema"] = "farfield-run-v1";
  report["tool_version"] = kToolVersion;
  report["config"] = ff::to_json(cfg);
  report["utterances"] = json::array();

  // one skip draw per utterance, in input order
  ff::Rng skip_rng(cfg.seed);

  for (std::size_t idx = 0; idx < args.inputs.size(); ++idx) {
    const std::string& input = args.inputs[idx];
    std::string stem = stem_of(input);
    // keep output names unique when two inputs share a stem
    for (std::size_t j = 0; j < idx; ++j)
      if (stem_of(args.inputs[j]) == stem) {
        stem += "_" + std::to_string(idx);
        break;
      }

    std::optional<ff::SceneBundle> scene;
    ff::AudioBuffer audio;
    if (fs::is_directory(input)) {
      scene = ff::read_scene_dir(input);
      audio = scene->observed;
    } else {
      audio = ff::read_wav(input);
    }

    const ff::StftTensor y = ff::stft(audio, cfg.stft);
    std::optional<SceneTensors> tensors;
    const SceneTensors* tensors_ptr = nullptr;
    const bool wants_oracle =
        (cfg.stages.wpe && cfg.wpe_mode == ff::WpeStageMode::kMask &&
         cfg.wpe_mask.provider == ff::MaskProvider::kOracleIrm) ||
        (cfg.stages.mvdr &&
         (cfg.speech_mask.provider == ff::MaskProvider::kOracleIrm ||
          cfg.noise_mask.provider == ff::MaskProvider::kOracleIrm));
    if (wants_oracle && scene) {
      tensors = scene_tensors(*scene, cfg.stft);
      tensors_ptr = &*tensors;
    }

    ff::PipelineConfig utt_cfg = cfg;
    const bool skip_draw = skip_rng.uniform() < cfg.skip_wpe_probability;
    const bool wpe_skipped = cfg.stages.wpe && skip_draw;
    if (wpe_skipped) utt_cfg.stages.wpe = false;

    std::optional<ff::MaskTensor> wpe_mask, speech_mask, noise_mask;
    if (utt_cfg.stages.wpe && utt_cfg.wpe_mode == ff::WpeStageMode::kMask)
      wpe_mask = resolve_mask(cfg.wpe_mask, y, tensors_ptr, MaskRole::kDereverb);
    if (utt_cfg.stages.mvdr) {
      speech_mask = to_kind(
          resolve_mask(cfg.speech_mask, y, tensors_ptr, MaskRole::kSpeech),
          cfg.beamform_mask_kind);
      noise_mask = to_kind(
          resolve_mask(cfg.noise_mask, y, tensors_ptr, MaskRole::kNoise),
          cfg.beamform_mask_kind);
    }

    const ff::StageOutputs out = ff::run_pipeline(
        y, utt_cfg, wpe_mask ? &*wpe_mask : nullptr,
        speech_mask ? &*speech_mask : nullptr, noise_mask ? &*noise_mask : nullptr);

    json u;
    u["input"] = input;
    u["kind"] = scene ? "scene" : "wav";
    u["stem"] = stem;
    u["frames"] = y.frames;
    u["bins"] = y.bins;
    u["channels"] = y.channels;
    u["sample_rate"] = audio.sample_rate;
    u["wpe_skipped"] = wpe_skipped;
    json timings;
    timings["wpe_ms"] = out.ms_wpe;
    timings["mvdr_ms"] = out.ms_mvdr;
    timings["features_ms"] = out.ms_features;
    u["timings"] = timings;
    u["diagnostics"] = diag_to_json(out);

    json outputs;
    std::optional<ff::AudioBuffer> enhanced_audio;
    if (out.dereverberated) {
      const std::string path = args.output_dir + "/" + stem + "_derev.wav";
      ff::write_wav(path, ff::istft(*out.dereverberated));
      outputs["dereverberated"] = path;
    }
    if (out.beamformed) {
      const std::string path = args.output_dir + "/" + stem + "_enhanced.wav";
      enhanced_audio = ff::istft(*out.beamformed);
      ff::write_wav(path, *enhanced_audio);
      outputs["enhanced"] = path;
    } else if (out.dereverberated) {
      enhanced_audio = ff::istft(*out.dereverberated);
    }
    if (out.features) {
      const std::string path = args.output_dir + "/" + stem + "_features.txt";
      ff::write_feature_matrix(path, *out.features);
      outputs["features"] = path;
      json stats;
      stats["frames"] = out.features->frames;
      stats["dims"] = out.features->dims;
      u["feature_shape"] = stats;
    }
    u["outputs"] = outputs;

    if (scene && enhanced_audio) {
      json metrics;
      try {
        if (!tensors) tensors = scene_tensors(*scene, cfg.stft);
        const ff::StftTensor enh = ff::stft(*enhanced_audio, cfg.stft);
        const ff::AudioBuffer direct =
            ff::direct_path_image(scene->dry, scene->direct_delays);
        // trim to a common frame count; istft shortens by up to one frame
        const int frames = std::min(enh.frames, tensors->observed.frames);
        auto head = [frames](const ff::StftTensor& x) {
          ff::StftTensor h = x;
          h.frames = frames;
          h.data.resize(static_cast<std::size_t>(frames) * x.bins * x.channels);
          return h;
        };
        metrics["stft_mse_observed"] =
            ff::metric_stft_mse(head(tensors->observed), head(tensors->direct));
        metrics["stft_mse_output"] =
            ff::metric_stft_mse(head(enh), head(tensors->direct));
        metrics["drr_gain_db"] =
            ff::metric_drr_gain(*enhanced_audio, scene->observed, scene->dry, 512);
        ff::AudioBuffer clean_ref;
        clean_ref.sample_rate = direct.sample_rate;
        clean_ref.channels.push_back(direct.channels[0]);
        metrics["segsnr_db"] = ff::metric_segsnr(*enhanced_audio, clean_ref, 512);
      } catch (const std::exception& e) {
        metrics["error"] = e.what();
      }
      u["metrics"] = metrics;
    }

    report["utterances"].push_back(u);
    std::cout << "enhanced " << input << " -> " << args.output_dir << "/" << stem
              << "_*\n";
  }

  std::ofstream out(report_path);
  if (!out) ff::fail("cannot write report: " + report_path);
  out << report.dump(2) << "\n";
  std::cout << "report: " << report_path << "\n";
  return 0;
}

// ---- simulate ----

struct SimulateArgs {
  std::string config_path;
  std::string out_dir;
  int count = 1;
  std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& args) {
  ff::SceneConfig base;
  if (!args.config_path.empty())
    base = ff::scene_config_from_json(ff::load_json_file(args.config_path));
  if (args.seed) base.seed = *args.seed;
  if (args.count < 0) throw ff::ConfigError("count must be >= 0");
  fs::create_directories(args.out_dir);

  json index;
  index["schema"] = "farfield-scene-index-v1";
  index["count"] = args.count;
  index["scenes"] = json::array();
  for (int i = 0; i < args.count; ++i) {
    ff::SceneConfig cfg = base;
    cfg.seed = base.seed + static_cast<std::uint64_t>(i);
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d", i);
    const std::string dir = args.out_dir + "/" + name;
    ff::write_scene_dir(dir, ff::render_scene(cfg));
    json entry;
    entry["dir"] = name;
    entry["seed"] = cfg.seed;
    index["scenes"].push_back(entry);
    std::cout << "wrote " << dir << "\n";
  }
  std::ofstream out(args.out_dir + "/index.json");
  if (!out) ff::fail("cannot write scene index in " + args.out_dir);
  out << index.dump(2) << "\n";
  return 0;
}

// ---- gradcheck ----

struct GradcheckArgs {
  std::string config_path;
  std::string report_path = "gradcheck_report.json";
  int directions = 10;
  bool pin_boundary = false;
  std::optional<std::uint64_t> seed;
};

// Boundary mode pins every mask entry at the clipped-ReLU clamp value 1.0,
// where the loss is known to have a kink. The kink's quotient signature is
// first order in h, so it only rises above evaluation noise at coarse steps;
// boundary mode therefore defaults to larger ones.
std::vector<ff::DerivativeRecord> boundary_sweep(ff::GraphProbe probe,
                                                 int n_directions) {
  probe.param = ff::MaskParam::kClippedRelu;
  ff::ProbeRunner runner(probe);
  ff::Rng rng(probe.seed ^ 0x5DEECE66Dull);
  std::vector<ff::DerivativeRecord> records;
  for (int i = 0; i < n_directions; ++i) {
    ff::MaskPoint point = runner.sample_point(&rng);
    const ff::MaskPoint dir = runner.sample_direction(point, &rng);
    auto pin = [](std::optional<ff::MaskTensor>& m) {
      if (m)
        for (double& v : m->values) v = 1.0;
    };
    pin(point.wpe);
    pin(point.speech);
    pin(point.noise);
    records.push_back(runner.derivative_record(point, dir));
  }
  return records;
}

int run_gradcheck(const GradcheckArgs& args) {
  ff::GraphProbe probe;
  if (!args.config_path.empty())
    probe = ff::probe_from_json(ff::load_json_file(args.config_path));
  if (args.seed) probe.seed = *args.seed;
  if (args.directions < 0) throw ff::ConfigError("directions must be >= 0");
  if (args.pin_boundary && args.config_path.empty())
    probe.steps = {0.2, 0.1, 0.05};

  const std::vector<ff::DerivativeRecord> records =
      args.pin_boundary ? boundary_sweep(probe, args.directions)
                        : ff::smoothness_sweep(probe, args.directions);

  json report;
  report["schema"] = "farfield-gradcheck-v1";
  report["tool_version"] = kToolVersion;
  report["probe"] = ff::to_json(probe);
  report["records"] = json::array();
  int n_converged = 0, n_fallback = 0, n_bad = 0;
  for (const ff::DerivativeRecord& rec : records) {
    json r;
    r["steps"] = rec.steps;
    r["quotients"] = rec.quotients;
    r["extrapolated"] = rec.extrapolated;
    r["observed_order"] = rec.observed_order;
    r["loss_scale"] = rec.loss_scale;
    r["converged"] = rec.converged;
    r["fallback_flagged"] = rec.fallback_flagged;
    report["records"].push_back(r);
    if (rec.converged) ++n_converged;
    if (rec.fallback_flagged) ++n_fallback;
    if (!rec.converged && !rec.fallback_flagged) ++n_bad;
  }
  json summary;
  summary["directions"] = static_cast<int>(records.size());
  summary["converged"] = n_converged;
  summary["fallback_flagged"] = n_fallback;
  summary["failed"] = n_bad;
  summary["boundary_mode"] = args.pin_boundary;
  report["summary"] = summary;

  std::ofstream out(args.report_path);
  if (!out) ff::fail("cannot write report: " + args.report_path);
  out << report.dump(2) << "\n";
  std::cout << "gradcheck: " << n_converged << "/" << records.size()
            << " converged, " << n_fallback << " flagged, " << n_bad
            << " failed -> " << args.report_path << "\n";
  // Pinned-boundary probes sit on a known kink; non-convergence there is
  // the expected outcome, reported as a warning rather than a failure.
  if (args.pin_boundary) {
    if (n_bad > 0)
      std::cout << "warning: " << n_bad
                << " boundary probe(s) hit the expected clamp kink\n";
    return 0;
  }
  return n_bad == 0 ? 0 : 1;
}

// ---- spectrogram ----

struct SpectrogramArgs {
  std::vector<std::string> inputs;
  std::string output_dir = ".";
  int fft_size = 512;
  int hop = 128;
  std::string window = "sqrt_hann";
  int channel = 0;
};

int run_spectrogram(const SpectrogramArgs& args) {
  ff::StftConfig cfg;
  try {
    cfg = ff::StftConfig::make(args.fft_size, args.hop,
                               ff::window_from_name(args.window));
  } catch (const std::invalid_argument& e) {
    throw ff::ConfigError(e.what());
  }
  if (args.channel < 0) throw ff::ConfigError("channel must be >= 0");
  fs::create_directories(args.output_dir);

  for (const std::string& input : args.inputs) {
    const ff::AudioBuffer audio = ff::read_wav(input);
    if (args.channel >= audio.num_channels())
      ff::fail("channel " + std::to_string(args.channel) + " out of range for " +
               input);
    const ff::StftTensor x = ff::stft(audio, cfg);
    std::vector<double> mag(static_cast<std::size_t>(x.frames) * x.bins);
    for (int t = 0; t < x.frames; ++t)
      for (int b = 0; b < x.bins; ++b)
        mag[static_cast<std::size_t>(t) * x.bins + b] =
            std::log(std::abs(x.at(t, b, args.channel)) + 1e-10);
    const std::string path = args.output_dir + "/" + stem_of(input) + "_spec.txt";
    ff::write_text_matrix(path, x.frames, x.bins, mag.data());
    std::cout << "wrote " << path << " (" << x.frames << " x " << x.bins << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"far-field speech enhancement toolkit"};
  app.set_version_flag("--version", std::string("farfield ") + kToolVersion);
  app.require_subcommand(1);

  EnhanceArgs enhance;
  CLI::App* enh = app.add_subcommand(
      "enhance", "dereverberate, beamform and featurize wavs or scene dirs");
  enh->add_option("inputs", enhance.inputs, "wav files or scene directories")
      ->required();
  enh->add_option("--config", enhance.config_path, "pipeline config json");
  enh->add_option("--output-dir", enhance.output_dir, "where outputs land");
  enh->add_option("--report", enhance.report_path,
                  "run report path (default: <output-dir>/report.json)");

  SimulateArgs simulate;
  CLI::App* sim =
      app.add_subcommand("simulate", "render synthetic far-field scenes");
  sim->add_option("--config", simulate.config_path, "scene config json");
  sim->add_option("--out", simulate.out_dir, "output directory")->required();
  sim->add_option("--count", simulate.count, "number of scenes");
  sim->add_option("--seed", simulate.seed, "override the base seed");

  GradcheckArgs gradcheck;
  CLI::App* grad = app.add_subcommand(
      "gradcheck", "finite-difference smoothness check of the mask-to-loss map");
  grad->add_option("--config", gradcheck.config_path, "probe config json");
  grad->add_option("--directions", gradcheck.directions,
                   "number of probe directions");
  grad->add_option("--out", gradcheck.report_path, "report path");
  grad->add_option("--seed", gradcheck.seed, "override the probe seed");
  grad->add_flag("--pin-boundary", gradcheck.pin_boundary,
                 "pin masks at the clipped-ReLU clamp to demonstrate the kink");

  SpectrogramArgs spec;
  CLI::App* sp = app.add_subcommand(
      "spectrogram", "dump log-magnitude spectrograms as text matrices");
  sp->add_option("inputs", spec.inputs, "wav files")->required();
  sp->add_option("--output-dir", spec.output_dir, "where outputs land");
  sp->add_option("--fft-size", spec.fft_size, "fft size (power of two)");
  sp->add_option("--hop", spec.hop, "hop size in samples");
  sp->add_option("--window", spec.window, "sqrt_hann or hann");
  sp->add_option("--channel", spec.channel, "channel to dump");

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(enh)) return run_enhance(enhance);
    if (app.got_subcommand(sim)) return run_simulate(simulate);
    if (app.got_subcommand(grad)) return run_gradcheck(gradcheck);
    if (app.got_subcommand(sp)) return run_spectrogram(spec);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const farfield::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
