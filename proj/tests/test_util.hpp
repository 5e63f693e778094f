// tests/test_util.hpp

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

#include <unistd.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "farfield/masks.hpp"
#include "farfield/rng.hpp"
#include "farfield/stft.hpp"

namespace testutil {

// Scratch directory under the system temp root, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("farfield_test_" + tag + "_" + std::to_string(++counter) + "_" +
             std::to_string(static_cast<std::uint64_t>(::getpid())));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& leaf = "") const {
    return leaf.empty() ? path_.string() : (path_ / leaf).string();
  }

 private:
  std::filesystem::path path_;
};

// Synthetic tensor with a config whose fft_size matches the bin count, so
// shape validation in the consuming stages passes.
inline farfield::StftTensor make_tensor(int frames, int bins, int channels) {
  farfield::StftConfig cfg;
  cfg.fft_size = 2 * (bins - 1);
  cfg.hop = std::max(1, cfg.fft_size / 4);
  return farfield::StftTensor::zeros(frames, bins, channels, cfg, 16000.0);
}

inline farfield::StftTensor random_tensor(int frames, int bins, int channels,
                                          farfield::Rng* rng) {
  farfield::StftTensor x = make_tensor(frames, bins, channels);
  for (farfield::cplx& v : x.data) v = rng->gaussian_cplx();
  return x;
}

inline farfield::MaskTensor random_mask(int frames, int bins, int channels,
                                        farfield::Rng* rng) {
  farfield::MaskTensor w = farfield::MaskTensor::tf(frames, bins, channels);
  for (double& v : w.values) v = rng->uniform();
  return w;
}

inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    num += d * d;
    den += b[i] * b[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double tensor_rel_change(const farfield::StftTensor& a,
                                const farfield::StftTensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    num += std::norm(a.data[i] - b.data[i]);
    den += std::norm(b.data[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double tensor_max_diff(const farfield::StftTensor& a,
                              const farfield::StftTensor& b) {
  double mx = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    mx = std::max(mx, std::abs(a.data[i] - b.data[i]));
  return mx;
}

}  // namespace testutil
