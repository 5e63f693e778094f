// farfield/masks.hpp

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
#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "farfield/common.hpp"
#include "farfield/stft.hpp"

namespace farfield {

// tf masks carry a value per (frame, bin, channel); sad masks carry a value
// per (frame, channel) and broadcast over bins, the speech-activity shape.
enum class MaskKind { kTf, kSad };

struct MaskTensor {
  MaskKind kind = MaskKind::kTf;
  int frames = 0;
  int bins = 0;      // logical bin count, also for sad masks
  int channels = 0;  // 1 means channel-averaged, broadcast over channels
  std::vector<double> values;

  static MaskTensor tf(int frames, int bins, int channels, double fill = 0.0) {
    MaskTensor w;
    w.kind = MaskKind::kTf;
    w.frames = frames;
    w.bins = bins;
    w.channels = channels;
    w.values.assign(static_cast<std::size_t>(frames) * bins * channels, fill);
    return w;
  }

  static MaskTensor sad(int frames, int bins, int channels, double fill = 0.0) {
    MaskTensor w;
    w.kind = MaskKind::kSad;
    w.frames = frames;
    w.bins = bins;
    w.channels = channels;
    w.values.assign(static_cast<std::size_t>(frames) * channels, fill);
    return w;
  }

  // Read access with sad-over-bins and averaged-over-channels broadcast.
  double at(int t, int b, int m) const {
    const int mi = (channels == 1) ? 0 : m;
    if (kind == MaskKind::kSad)
      return values[static_cast<std::size_t>(t) * channels + mi];
    return values[(static_cast<std::size_t>(t) * bins + b) * channels + mi];
  }

  double& ref(int t, int b, int m) {
    if (kind == MaskKind::kSad)
      return values[static_cast<std::size_t>(t) * channels + m];
    return values[(static_cast<std::size_t>(t) * bins + b) * channels + m];
  }

  void validate_range() const {
    for (double v : values)
      require(v >= 0.0 && v <= 1.0, "mask value outside [0, 1]");
  }

  void validate_against(const StftTensor& x) const {
    require(frames == x.frames && bins == x.bins, "mask/tensor shape mismatch");
    require(channels == 1 || channels == x.channels,
            "mask channels must match the tensor or be averaged");
  }
};

enum class Activation { kClippedRelu1, kSigmoid };

// clipped_relu_1 is min(max(x, 0), 1); sigmoid is the logistic function.
// Both land in [0, 1] for any finite input.
inline double clamp_activation(double x, Activation act) {
  if (act == Activation::kClippedRelu1) return std::clamp(x, 0.0, 1.0);
  return 1.0 / (1.0 + std::exp(-x));
}

inline MaskTensor constant_mask(const StftTensor& like, double value) {
  require(value >= 0.0 && value <= 1.0, "constant mask value outside [0, 1]");
  return MaskTensor::tf(like.frames, like.bins, like.channels, value);
}

// Ideal-ratio mask from known reference and interference spectrograms:
// |ref|^2 / (|ref|^2 + |interference|^2 + eps), eps tied to the mean power
// of the pair so the mask is scale-free.
inline MaskTensor oracle_irm(const StftTensor& reference,
                             const StftTensor& interference) {
  require(reference.frames == interference.frames &&
              reference.bins == interference.bins &&
              reference.channels == interference.channels,
          "reference/interference shapes must match");
  double mean_power = 0.0;
  for (std::size_t i = 0; i < reference.data.size(); ++i)
    mean_power += std::norm(reference.data[i]) + std::norm(interference.data[i]);
  mean_power /= std::max<std::size_t>(reference.data.size(), 1);
  const double eps = std::max(1e-10 * mean_power, 1e-300);

  MaskTensor w = MaskTensor::tf(reference.frames, reference.bins, reference.channels);
  for (std::size_t i = 0; i < reference.data.size(); ++i) {
    const double pr = std::norm(reference.data[i]);
    const double pi = std::norm(interference.data[i]);
    w.values[i] = pr / (pr + pi + eps);
  }
  return w;
}

// Per-frame speech activity from frame energy: the frame energy in dB is
// compared against the per-channel utterance median shifted by threshold_db,
// and ramped through a logistic whose 0.27..0.73 transition spans 3 dB.
inline MaskTensor energy_sad(const StftTensor& y, double threshold_db) {
  y.validate_shape();
  require(y.frames > 0, "cannot run activity detection on zero frames");
  MaskTensor w = MaskTensor::sad(y.frames, y.bins, y.channels);
  std::vector<double> energy_db(static_cast<std::size_t>(y.frames));
  for (int m = 0; m < y.channels; ++m) {
    for (int t = 0; t < y.frames; ++t) {
      double e = 0.0;
      for (int b = 0; b < y.bins; ++b) e += std::norm(y.at(t, b, m));
      energy_db[static_cast<std::size_t>(t)] = 10.0 * std::log10(e + 1e-30);
    }
    std::vector<double> sorted = energy_db;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t tq = sorted.size();
    const double median = (tq % 2 == 1)
                              ? sorted[tq / 2]
                              : 0.5 * (sorted[tq / 2 - 1] + sorted[tq / 2]);
    const double knee = median + threshold_db;
    for (int t = 0; t < y.frames; ++t) {
      const double arg = (energy_db[static_cast<std::size_t>(t)] - knee) / 1.5;
      w.ref(t, 0, m) = 1.0 / (1.0 + std::exp(-arg));
    }
  }
  return w;
}

// Small feed-forward mask network over per-frame magnitude spectra.
// Hidden layers use plain ReLU; the final layer uses the configured
// activation so the output lands in [0, 1]. A final layer of size one makes
// a sad mask, a final layer of size bins makes a tf mask.
struct MlpWeights {
  struct Layer {
    Eigen::MatrixXd weight;  // rows x cols
    Eigen::VectorXd bias;    // rows
  };
  std::vector<Layer> layers;
  Activation activation = Activation::kSigmoid;

  void validate(int input_dim) const {
    require(!layers.empty(), "mlp weights have no layers");
    int dim = input_dim;
    for (const Layer& l : layers) {
      require(l.weight.cols() == dim, "mlp layer input size mismatch");
      require(l.bias.size() == l.weight.rows(), "mlp bias size mismatch");
      dim = static_cast<int>(l.weight.rows());
    }
  }

  int output_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
  }

  static MlpWeights load(const std::string& path);
  void save(const std::string& path) const;
};

inline const char* activation_name(Activation a) {
  return a == Activation::kSigmoid ? "sigmoid" : "clipped_relu_1";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "clipped_relu_1") return Activation::kClippedRelu1;
  fail("unknown activation name: " + s);
}

// Weights file schema (JSON): {"schema": "farfield-mlp-v1",
// "activation": <name>, "layers": [{"rows": R, "cols": C,
// "weight": [R*C row-major], "bias": [R]}]}.
inline MlpWeights MlpWeights::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open mlp weights file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("malformed mlp weights file " + path + ": " + e.what());
  }
  if (!j.contains("schema") || j["schema"] != "farfield-mlp-v1")
    fail("mlp weights file " + path + " has missing or unknown schema field");
  MlpWeights w;
  w.activation = activation_from_name(j.at("activation").get<std::string>());
  for (const auto& jl : j.at("layers")) {
    const int rows = jl.at("rows").get<int>();
    const int cols = jl.at("cols").get<int>();
    const auto& wv = jl.at("weight");
    const auto& bv = jl.at("bias");
    if (rows <= 0 || cols <= 0 || static_cast<int>(wv.size()) != rows * cols ||
        static_cast<int>(bv.size()) != rows)
      fail("mlp weights file " + path + " has inconsistent layer dimensions");
    Layer l;
    l.weight.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        l.weight(r, c) = wv[static_cast<std::size_t>(r) * cols + c].get<double>();
    l.bias.resize(rows);
    for (int r = 0; r < rows; ++r) l.bias(r) = bv[static_cast<std::size_t>(r)].get<double>();
    w.layers.push_back(std::move(l));
  }
  if (w.layers.empty()) fail("mlp weights file " + path + " has no layers");
  return w;
}

inline void MlpWeights::save(const std::string& path) const {
  nlohmann::json j;
  j["schema"] = "farfield-mlp-v1";
  j["activation"] = activation_name(activation);
  j["layers"] = nlohmann::json::array();
  for (const Layer& l : layers) {
    nlohmann::json jl;
    jl["rows"] = static_cast<int>(l.weight.rows());
    jl["cols"] = static_cast<int>(l.weight.cols());
    std::vector<double> wv;
    wv.reserve(static_cast<std::size_t>(l.weight.size()));
    for (int r = 0; r < l.weight.rows(); ++r)
      for (int c = 0; c < l.weight.cols(); ++c) wv.push_back(l.weight(r, c));
    jl["weight"] = wv;
    jl["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    j["layers"].push_back(std::move(jl));
  }
  std::ofstream out(path);
  if (!out) fail("cannot write mlp weights file: " + path);
  out << j.dump(2) << "\n";
}

inline MaskTensor mlp_infer(const MlpWeights& weights, const StftTensor& y) {
  y.validate_shape();
  weights.validate(y.bins);
  const int out_dim = weights.output_dim();
  require(out_dim == 1 || out_dim == y.bins,
          "mlp final layer must have 1 (sad) or bins (tf) outputs");
  const bool sad = (out_dim == 1);
  MaskTensor w = sad ? MaskTensor::sad(y.frames, y.bins, y.channels)
                     : MaskTensor::tf(y.frames, y.bins, y.channels);

  Eigen::VectorXd h(y.bins);
  for (int m = 0; m < y.channels; ++m) {
    for (int t = 0; t < y.frames; ++t) {
      for (int b = 0; b < y.bins; ++b) h(b) = std::abs(y.at(t, b, m));
      Eigen::VectorXd cur = h;
      for (std::size_t li = 0; li < weights.layers.size(); ++li) {
        cur = (weights.layers[li].weight * cur + weights.layers[li].bias).eval();
        if (li + 1 < weights.layers.size())
          cur = cur.cwiseMax(0.0);  // hidden ReLU
        else
          for (int r = 0; r < cur.size(); ++r)
            cur(r) = clamp_activation(cur(r), weights.activation);
      }
      if (sad)
        w.ref(t, 0, m) = cur(0);
      else
        for (int b = 0; b < y.bins; ++b) w.ref(t, b, m) = cur(b);
    }
  }
  return w;
}

// Materializes the bin broadcast of a sad mask; handy for equivalence tests
// and for consumers that want a plain tf layout.
inline MaskTensor expand_to_tf(const MaskTensor& w) {
  if (w.kind == MaskKind::kTf) return w;
  MaskTensor out = MaskTensor::tf(w.frames, w.bins, w.channels);
  for (int t = 0; t < w.frames; ++t)
    for (int b = 0; b < w.bins; ++b)
      for (int m = 0; m < w.channels; ++m) out.ref(t, b, m) = w.at(t, b, m);
  return out;
}

// Bin-averages a tf mask down to the sad shape.
inline MaskTensor collapse_to_sad(const MaskTensor& w) {
  if (w.kind == MaskKind::kSad) return w;
  MaskTensor out = MaskTensor::sad(w.frames, w.bins, w.channels);
  for (int t = 0; t < w.frames; ++t)
    for (int m = 0; m < w.channels; ++m) {
      double acc = 0.0;
      for (int b = 0; b < w.bins; ++b) acc += w.at(t, b, m);
      out.ref(t, 0, m) = acc / w.bins;
    }
  return out;
}

// How a pipeline stage obtains its mask. oracle_irm needs scene reference
// signals and is resolved by the caller that has them.
enum class MaskProvider { kConstant, kOracleIrm, kEnergySad, kMlp };

struct MaskProviderSpec {
  MaskProvider provider = MaskProvider::kConstant;
  double value = 1.0;          // kConstant
  double threshold_db = -6.0;  // kEnergySad
  std::string weights_path;    // kMlp
};

}  // namespace farfield
