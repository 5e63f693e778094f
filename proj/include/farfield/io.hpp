// farfield/io.hpp

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

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "farfield/common.hpp"
#include "farfield/features.hpp"

namespace farfield {

// Text matrix format: one header line "rows cols", then rows lines of cols
// space-separated values printed with enough digits to round-trip doubles.
// Features and spectrogram dumps both use it.
inline void write_text_matrix(const std::string& path, int rows, int cols,
                              const double* data) {
  require(rows >= 0 && cols >= 1, "bad matrix shape");
  std::ofstream out(path);
  if (!out) fail("cannot write matrix file: " + path);
  out << rows << " " << cols << "\n";
  char buf[40];
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g",
                    data[static_cast<std::size_t>(r) * cols + c]);
      out << buf << (c + 1 == cols ? "" : " ");
    }
    out << "\n";
  }
  if (!out) fail("short write on matrix file: " + path);
}

inline void write_feature_matrix(const std::string& path, const FeatureMatrix& f) {
  write_text_matrix(path, f.frames, f.dims, f.values.data());
}

struct TextMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
};

inline TextMatrix read_text_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open matrix file: " + path);
  TextMatrix m;
  in >> m.rows >> m.cols;
  if (!in || m.rows < 0 || m.cols < 1) fail("malformed matrix header: " + path);
  m.values.resize(static_cast<std::size_t>(m.rows) * m.cols);
  for (double& v : m.values)
    if (!(in >> v)) fail("truncated matrix file: " + path);
  return m;
}

// FNV-1a over raw bytes; used to compare seeded runs for bit identity.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

template <typename T>
std::uint64_t fnv1a_vec(const std::vector<T>& v, std::uint64_t h = 0xcbf29ce484222325ull) {
  return v.empty() ? h : fnv1a(v.data(), v.size() * sizeof(T), h);
}

}  // namespace farfield
