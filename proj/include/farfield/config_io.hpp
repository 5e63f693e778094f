// farfield/config_io.hpp

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

#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include <json.hpp>

#include "farfield/common.hpp"
#include "farfield/gradcheck.hpp"
#include "farfield/pipeline.hpp"
#include "farfield/simulate.hpp"

namespace farfield {

// JSON bindings for every user-facing config and the on-disk scene layout.
// Parsing problems throw ConfigError so callers can map them to a distinct
// exit code; processing problems keep using std::runtime_error.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

using json = nlohmann::json;

namespace cfg_detail {

[[noreturn]] inline void bad(const std::string& msg) { throw ConfigError(msg); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    bad(std::string("config field has the wrong type: ") + key);
  }
}

inline double get_snr(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_string() && (v == "inf" || v == "+inf"))
    return std::numeric_limits<double>::infinity();
  if (v.is_number()) return v.get<double>();
  bad(std::string("snr field must be a number or \"inf\": ") + key);
}

inline json snr_to_json(double snr) {
  if (std::isinf(snr) && snr > 0.0) return "inf";
  return snr;
}

}  // namespace cfg_detail

// ---- enum names ----

inline const char* window_name(Window w) {
  return w == Window::kSqrtHann ? "sqrt_hann" : "hann";
}
inline Window window_from_name(const std::string& s) {
  if (s == "sqrt_hann") return Window::kSqrtHann;
  if (s == "hann") return Window::kHann;
  cfg_detail::bad("unknown window: " + s);
}

inline const char* mask_provider_name(MaskProvider p) {
  switch (p) {
    case MaskProvider::kConstant: return "constant";
    case MaskProvider::kOracleIrm: return "oracle_irm";
    case MaskProvider::kEnergySad: return "energy_sad";
    case MaskProvider::kMlp: return "mlp";
  }
  return "constant";
}
inline MaskProvider mask_provider_from_name(const std::string& s) {
  if (s == "constant") return MaskProvider::kConstant;
  if (s == "oracle_irm") return MaskProvider::kOracleIrm;
  if (s == "energy_sad") return MaskProvider::kEnergySad;
  if (s == "mlp") return MaskProvider::kMlp;
  cfg_detail::bad("unknown mask provider: " + s);
}

inline const char* mask_kind_name(MaskKind k) {
  return k == MaskKind::kTf ? "tf" : "sad";
}
inline MaskKind mask_kind_from_name(const std::string& s) {
  if (s == "tf") return MaskKind::kTf;
  if (s == "sad") return MaskKind::kSad;
  cfg_detail::bad("unknown mask kind: " + s);
}

inline const char* noise_kind_name(NoiseKind k) {
  return k == NoiseKind::kWhite ? "white" : "diffuse_lowpass";
}
inline NoiseKind noise_kind_from_name(const std::string& s) {
  if (s == "white") return NoiseKind::kWhite;
  if (s == "diffuse_lowpass") return NoiseKind::kDiffuseLowpass;
  cfg_detail::bad("unknown noise kind: " + s);
}

// ---- mask provider ----

inline json to_json(const MaskProviderSpec& spec) {
  json j;
  j["provider"] = mask_provider_name(spec.provider);
  switch (spec.provider) {
    case MaskProvider::kConstant: j["value"] = spec.value; break;
    case MaskProvider::kEnergySad: j["threshold_db"] = spec.threshold_db; break;
    case MaskProvider::kMlp: j["weights_path"] = spec.weights_path; break;
    case MaskProvider::kOracleIrm: break;
  }
  return j;
}

inline MaskProviderSpec mask_provider_from_json(const json& j) {
  MaskProviderSpec spec;
  if (!j.is_object()) cfg_detail::bad("mask provider must be an object");
  spec.provider =
      mask_provider_from_name(cfg_detail::get_or<std::string>(j, "provider", "constant"));
  spec.value = cfg_detail::get_or<double>(j, "value", 1.0);
  spec.threshold_db = cfg_detail::get_or<double>(j, "threshold_db", -6.0);
  spec.weights_path = cfg_detail::get_or<std::string>(j, "weights_path", "");
  if (spec.provider == MaskProvider::kMlp && spec.weights_path.empty())
    cfg_detail::bad("mlp mask provider needs weights_path");
  if (spec.provider == MaskProvider::kConstant &&
      (spec.value < 0.0 || spec.value > 1.0))
    cfg_detail::bad("constant mask value must be in [0, 1]");
  return spec;
}

// ---- stft ----

inline json to_json(const StftConfig& cfg) {
  json j;
  j["fft_size"] = cfg.fft_size;
  j["hop"] = cfg.hop;
  j["window"] = window_name(cfg.window);
  j["center_pad"] = cfg.center_pad;
  return j;
}

inline StftConfig stft_config_from_json(const json& j) {
  StftConfig cfg;
  cfg.fft_size = cfg_detail::get_or<int>(j, "fft_size", 512);
  cfg.hop = cfg_detail::get_or<int>(j, "hop", 128);
  cfg.window = window_from_name(cfg_detail::get_or<std::string>(j, "window", "sqrt_hann"));
  cfg.center_pad = cfg_detail::get_or<bool>(j, "center_pad", true);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    cfg_detail::bad(std::string("bad stft config: ") + e.what());
  }
  return cfg;
}

// ---- pipeline ----

inline json to_json(const PipelineConfig& cfg) {
  json j;
  json stages = json::array();
  if (cfg.stages.wpe) stages.push_back("wpe");
  if (cfg.stages.mvdr) stages.push_back("mvdr");
  if (cfg.stages.features) stages.push_back("features");
  j["stages"] = stages;
  j["seed"] = cfg.seed;
  j["skip_wpe_probability"] = cfg.skip_wpe_probability;
  j["stft"] = to_json(cfg.stft);
  json w;
  w["filter_order"] = cfg.wpe.filter_order;
  w["delay"] = cfg.wpe.delay;
  w["iterations"] = cfg.wpe.iterations;
  w["variance_floor"] = cfg.wpe.variance_floor;
  w["diag_load"] = cfg.wpe.diag_load;
  w["mode"] = (cfg.wpe_mode == WpeStageMode::kIterative) ? "iterative" : "mask";
  w["mask"] = to_json(cfg.wpe_mask);
  j["wpe"] = w;
  json b;
  b["speech_mask"] = to_json(cfg.speech_mask);
  b["noise_mask"] = to_json(cfg.noise_mask);
  b["mask_kind"] = mask_kind_name(cfg.beamform_mask_kind);
  json ref;
  ref["mode"] = (cfg.mvdr.reference_mode == ReferenceMode::kFixed) ? "fixed" : "soft";
  ref["channel"] = cfg.mvdr.reference_channel;
  b["reference"] = ref;
  b["diag_load"] = cfg.mvdr.diag_load;
  b["normalize_psd"] = cfg.mvdr.normalize_psd;
  j["mvdr"] = b;
  json m;
  m["n_mels"] = cfg.mel.n_mels;
  m["f_min"] = cfg.mel.f_min;
  m["f_max"] = cfg.mel.f_max;
  j["mel"] = m;
  return j;
}

inline PipelineConfig pipeline_config_from_json(const json& j) {
  if (!j.is_object()) cfg_detail::bad("pipeline config must be a JSON object");
  PipelineConfig cfg;

  if (j.contains("stages")) {
    if (!j.at("stages").is_array()) cfg_detail::bad("stages must be an array");
    cfg.stages = PipelineStages{false, false, false};
    int last = -1;
    for (const auto& s : j.at("stages")) {
      const std::string name = s.get<std::string>();
      int idx;
      if (name == "wpe")
        idx = 0;
      else if (name == "mvdr")
        idx = 1;
      else if (name == "features")
        idx = 2;
      else
        cfg_detail::bad("unknown stage: " + name);
      if (idx <= last) cfg_detail::bad("stages must be wpe < mvdr < features, no repeats");
      last = idx;
      if (idx == 0) cfg.stages.wpe = true;
      if (idx == 1) cfg.stages.mvdr = true;
      if (idx == 2) cfg.stages.features = true;
    }
  }
  cfg.seed = cfg_detail::get_or<std::uint64_t>(j, "seed", 0);
  cfg.skip_wpe_probability = cfg_detail::get_or<double>(j, "skip_wpe_probability", 0.0);
  if (cfg.skip_wpe_probability < 0.0 || cfg.skip_wpe_probability > 1.0)
    cfg_detail::bad("skip_wpe_probability must be in [0, 1]");
  if (j.contains("stft")) cfg.stft = stft_config_from_json(j.at("stft"));

  if (j.contains("wpe")) {
    const json& w = j.at("wpe");
    cfg.wpe.filter_order = cfg_detail::get_or<int>(w, "filter_order", 5);
    cfg.wpe.delay = cfg_detail::get_or<int>(w, "delay", 3);
    cfg.wpe.iterations = cfg_detail::get_or<int>(w, "iterations", 3);
    cfg.wpe.variance_floor = cfg_detail::get_or<double>(w, "variance_floor", 1e-10);
    cfg.wpe.diag_load = cfg_detail::get_or<double>(w, "diag_load", 1e-6);
    const std::string mode = cfg_detail::get_or<std::string>(w, "mode", "iterative");
    if (mode == "iterative")
      cfg.wpe_mode = WpeStageMode::kIterative;
    else if (mode == "mask")
      cfg.wpe_mode = WpeStageMode::kMask;
    else
      cfg_detail::bad("unknown wpe mode: " + mode);
    if (w.contains("mask")) cfg.wpe_mask = mask_provider_from_json(w.at("mask"));
    try {
      cfg.wpe.validate();
    } catch (const std::invalid_argument& e) {
      cfg_detail::bad(std::string("bad wpe config: ") + e.what());
    }
  }

  if (j.contains("mvdr")) {
    const json& b = j.at("mvdr");
    if (b.contains("speech_mask"))
      cfg.speech_mask = mask_provider_from_json(b.at("speech_mask"));
    if (b.contains("noise_mask"))
      cfg.noise_mask = mask_provider_from_json(b.at("noise_mask"));
    cfg.beamform_mask_kind =
        mask_kind_from_name(cfg_detail::get_or<std::string>(b, "mask_kind", "tf"));
    if (b.contains("reference")) {
      const json& r = b.at("reference");
      const std::string mode = cfg_detail::get_or<std::string>(r, "mode", "fixed");
      if (mode == "fixed")
        cfg.mvdr.reference_mode = ReferenceMode::kFixed;
      else if (mode == "soft")
        cfg.mvdr.reference_mode = ReferenceMode::kSoft;
      else
        cfg_detail::bad("unknown reference mode: " + mode);
      cfg.mvdr.reference_channel = cfg_detail::get_or<int>(r, "channel", 0);
      if (cfg.mvdr.reference_channel < 0)
        cfg_detail::bad("reference channel must be >= 0");
    }
    cfg.mvdr.diag_load = cfg_detail::get_or<double>(b, "diag_load", 1e-6);
    cfg.mvdr.normalize_psd = cfg_detail::get_or<bool>(b, "normalize_psd", false);
  }

  if (j.contains("mel")) {
    const json& m = j.at("mel");
    cfg.mel.n_mels = cfg_detail::get_or<int>(m, "n_mels", 80);
    cfg.mel.f_min = cfg_detail::get_or<double>(m, "f_min", 0.0);
    cfg.mel.f_max = cfg_detail::get_or<double>(m, "f_max", 8000.0);
    if (cfg.mel.n_mels < 1) cfg_detail::bad("n_mels must be >= 1");
    if (!(cfg.mel.f_min >= 0.0 && cfg.mel.f_min < cfg.mel.f_max))
      cfg_detail::bad("need 0 <= f_min < f_max");
  }
  return cfg;
}

// ---- scenes ----

inline json to_json(const SceneConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["channels"] = cfg.channels;
  j["duration"] = cfg.duration;
  j["sample_rate"] = cfg.sample_rate;
  json r;
  r["t60"] = cfg.rir.t60;
  r["direct_delay_spread"] = cfg.rir.direct_delay_spread;
  r["tail_density"] = cfg.rir.tail_density;
  j["rir"] = r;
  json n;
  n["kind"] = noise_kind_name(cfg.noise.kind);
  n["snr_db"] = cfg_detail::snr_to_json(cfg.noise.snr_db);
  j["noise"] = n;
  json s;
  s["kind"] = (cfg.source.kind == SourceKind::kSpeechlike) ? "speechlike" : "file";
  if (cfg.source.kind == SourceKind::kFile) s["path"] = cfg.source.path;
  j["source"] = s;
  j["label_frame"] = cfg.label_frame;
  j["label_hop"] = cfg.label_hop;
  return j;
}

inline SceneConfig scene_config_from_json(const json& j) {
  if (!j.is_object()) cfg_detail::bad("scene config must be a JSON object");
  SceneConfig cfg;
  cfg.seed = cfg_detail::get_or<std::uint64_t>(j, "seed", 0);
  cfg.channels = cfg_detail::get_or<int>(j, "channels", 2);
  cfg.duration = cfg_detail::get_or<double>(j, "duration", 2.0);
  cfg.sample_rate = cfg_detail::get_or<double>(j, "sample_rate", 16000.0);
  if (j.contains("rir")) {
    const json& r = j.at("rir");
    cfg.rir.t60 = cfg_detail::get_or<double>(r, "t60", 0.5);
    cfg.rir.direct_delay_spread = cfg_detail::get_or<int>(r, "direct_delay_spread", 4);
    cfg.rir.tail_density = cfg_detail::get_or<double>(r, "tail_density", 1.0);
  }
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    cfg.noise.kind =
        noise_kind_from_name(cfg_detail::get_or<std::string>(n, "kind", "white"));
    cfg.noise.snr_db = cfg_detail::get_snr(n, "snr_db", 20.0);
  }
  if (j.contains("source")) {
    const json& s = j.at("source");
    const std::string kind = cfg_detail::get_or<std::string>(s, "kind", "speechlike");
    if (kind == "speechlike")
      cfg.source.kind = SourceKind::kSpeechlike;
    else if (kind == "file")
      cfg.source.kind = SourceKind::kFile;
    else
      cfg_detail::bad("unknown source kind: " + kind);
    cfg.source.path = cfg_detail::get_or<std::string>(s, "path", "");
    if (cfg.source.kind == SourceKind::kFile && cfg.source.path.empty())
      cfg_detail::bad("file source needs a path");
  }
  cfg.label_frame = cfg_detail::get_or<int>(j, "label_frame", 512);
  cfg.label_hop = cfg_detail::get_or<int>(j, "label_hop", 128);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    cfg_detail::bad(std::string("bad scene config: ") + e.what());
  }
  return cfg;
}

// On-disk scene layout: five WAVs plus manifest.json. The manifest carries
// the config echo, sub-seeds, per-channel direct delays and the activity
// labels; its content is a pure function of the scene config, so reruns of
// the same seed produce byte-identical manifests.
inline json scene_manifest(const SceneBundle& scene) {
  json j;
  j["schema"] = "farfield-scene-v1";
  j["config"] = to_json(scene.config);
  json seeds;
  seeds["source"] = scene.seed_source;
  seeds["rir"] = scene.seed_rir;
  seeds["noise"] = scene.seed_noise;
  j["seeds"] = seeds;
  j["direct_delays"] = scene.direct_delays;
  j["achieved_snr_db"] = cfg_detail::snr_to_json(scene.achieved_snr_db);
  j["rir_samples"] = scene.rirs.empty() ? 0 : static_cast<int>(scene.rirs[0].size());
  j["activity"] = json::array();
  for (std::uint8_t a : scene.activity) j["activity"].push_back(static_cast<int>(a));
  json files;
  files["dry"] = "dry.wav";
  files["rirs"] = "rirs.wav";
  files["reverberant"] = "reverberant.wav";
  files["noise"] = "noise.wav";
  files["observed"] = "observed.wav";
  j["files"] = files;
  return j;
}

inline void write_scene_dir(const std::string& dir, const SceneBundle& scene) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_wav(dir + "/dry.wav", scene.dry);
  AudioBuffer rirs;
  rirs.sample_rate = scene.config.sample_rate;
  rirs.channels = scene.rirs;
  write_wav(dir + "/rirs.wav", rirs);
  write_wav(dir + "/reverberant.wav", scene.reverberant);
  write_wav(dir + "/noise.wav", scene.noise);
  write_wav(dir + "/observed.wav", scene.observed);
  std::ofstream out(dir + "/manifest.json");
  if (!out) fail("cannot write manifest: " + dir);
  out << scene_manifest(scene).dump(2) << "\n";
}

inline SceneBundle read_scene_dir(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) fail("scene directory has no manifest.json: " + dir);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("malformed manifest in " + dir + ": " + e.what());
  }
  if (!j.contains("schema") || j["schema"] != "farfield-scene-v1")
    fail("unknown scene manifest schema in " + dir);

  SceneBundle scene;
  scene.config = scene_config_from_json(j.at("config"));
  scene.seed_source = j.at("seeds").at("source").get<std::uint64_t>();
  scene.seed_rir = j.at("seeds").at("rir").get<std::uint64_t>();
  scene.seed_noise = j.at("seeds").at("noise").get<std::uint64_t>();
  scene.direct_delays = j.at("direct_delays").get<std::vector<int>>();
  scene.achieved_snr_db = cfg_detail::get_snr(j, "achieved_snr_db",
                                              std::numeric_limits<double>::infinity());
  for (const auto& a : j.at("activity"))
    scene.activity.push_back(static_cast<std::uint8_t>(a.get<int>()));
  scene.dry = read_wav(dir + "/" + j.at("files").at("dry").get<std::string>());
  AudioBuffer rirs = read_wav(dir + "/" + j.at("files").at("rirs").get<std::string>());
  scene.rirs = rirs.channels;
  scene.reverberant =
      read_wav(dir + "/" + j.at("files").at("reverberant").get<std::string>());
  scene.noise = read_wav(dir + "/" + j.at("files").at("noise").get<std::string>());
  scene.observed = read_wav(dir + "/" + j.at("files").at("observed").get<std::string>());
  return scene;
}

// ---- derivative probes ----

inline json to_json(const GraphProbe& probe) {
  json j;
  j["pipeline"] = (probe.pipeline == ProbePipeline::kWpeOnly)
                      ? "wpe_only"
                      : (probe.pipeline == ProbePipeline::kMvdrOnly ? "mvdr_only"
                                                                    : "full");
  j["loss"] = (probe.loss == ProbeLoss::kStftMse)
                  ? "stft_mse"
                  : (probe.loss == ProbeLoss::kLogmelMse ? "logmel_mse"
                                                         : "output_power");
  j["param"] = (probe.param == MaskParam::kDirect)
                   ? "direct"
                   : (probe.param == MaskParam::kClippedRelu ? "clipped_relu"
                                                             : "sigmoid");
  j["seed"] = probe.seed;
  j["steps"] = probe.steps;
  json s;
  s["channels"] = probe.channels;
  s["duration"] = probe.duration;
  s["t60"] = probe.t60;
  s["snr_db"] = cfg_detail::snr_to_json(probe.snr_db);
  s["fft_size"] = probe.fft_size;
  s["hop"] = probe.hop;
  j["scene"] = s;
  return j;
}

inline GraphProbe probe_from_json(const json& j) {
  if (!j.is_object()) cfg_detail::bad("probe config must be a JSON object");
  GraphProbe probe;
  const std::string pipeline = cfg_detail::get_or<std::string>(j, "pipeline", "full");
  if (pipeline == "wpe_only")
    probe.pipeline = ProbePipeline::kWpeOnly;
  else if (pipeline == "mvdr_only")
    probe.pipeline = ProbePipeline::kMvdrOnly;
  else if (pipeline == "full")
    probe.pipeline = ProbePipeline::kFull;
  else
    cfg_detail::bad("unknown probe pipeline: " + pipeline);
  const std::string loss = cfg_detail::get_or<std::string>(j, "loss", "stft_mse");
  if (loss == "stft_mse")
    probe.loss = ProbeLoss::kStftMse;
  else if (loss == "logmel_mse")
    probe.loss = ProbeLoss::kLogmelMse;
  else if (loss == "output_power")
    probe.loss = ProbeLoss::kOutputPower;
  else
    cfg_detail::bad("unknown probe loss: " + loss);
  const std::string param = cfg_detail::get_or<std::string>(j, "param", "direct");
  if (param == "direct")
    probe.param = MaskParam::kDirect;
  else if (param == "clipped_relu")
    probe.param = MaskParam::kClippedRelu;
  else if (param == "sigmoid")
    probe.param = MaskParam::kSigmoid;
  else
    cfg_detail::bad("unknown probe param: " + param);
  probe.seed = cfg_detail::get_or<std::uint64_t>(j, "seed", 1);
  if (j.contains("steps")) probe.steps = j.at("steps").get<std::vector<double>>();
  if (j.contains("scene")) {
    const json& s = j.at("scene");
    probe.channels = cfg_detail::get_or<int>(s, "channels", 2);
    probe.duration = cfg_detail::get_or<double>(s, "duration", 0.8);
    probe.t60 = cfg_detail::get_or<double>(s, "t60", 0.3);
    probe.snr_db = cfg_detail::get_snr(s, "snr_db", 10.0);
    probe.fft_size = cfg_detail::get_or<int>(s, "fft_size", 256);
    probe.hop = cfg_detail::get_or<int>(s, "hop", 64);
  }
  try {
    probe.validate();
  } catch (const std::invalid_argument& e) {
    cfg_detail::bad(std::string("bad probe config: ") + e.what());
  }
  return probe;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const std::exception& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
}

}  // namespace farfield
