// farfield/audio.hpp

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
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "farfield/common.hpp"

namespace farfield {

// Multichannel audio, planar layout, samples as doubles in roughly [-1, 1].
struct AudioBuffer {
  std::vector<std::vector<double>> channels;
  double sample_rate = 0.0;

  int num_channels() const { return static_cast<int>(channels.size()); }

  std::int64_t num_samples() const {
    return channels.empty() ? 0 : static_cast<std::int64_t>(channels[0].size());
  }

  void validate() const {
    require(!channels.empty(), "audio buffer has no channels");
    require(sample_rate > 0.0, "audio buffer needs a positive sample rate");
    for (const auto& ch : channels)
      require(ch.size() == channels[0].size(),
              "audio channels must have equal length");
    require(num_samples() > 0, "audio buffer is empty");
  }
};

enum class SampleFormat { kFloat32, kPcm16 };

namespace wav_detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::vector<unsigned char>* out, std::uint32_t v) {
  out->push_back(static_cast<unsigned char>(v & 0xff));
  out->push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  out->push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  out->push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

inline void put_u16(std::vector<unsigned char>* out, std::uint16_t v) {
  out->push_back(static_cast<unsigned char>(v & 0xff));
  out->push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

inline void put_tag(std::vector<unsigned char>* out, const char* tag) {
  out->insert(out->end(), tag, tag + 4);
}

}  // namespace wav_detail

// Reads a RIFF/WAVE file. Accepts 16-bit PCM and 32-bit IEEE float,
// interleaved; other codecs are rejected. Unknown chunks are skipped.
inline AudioBuffer read_wav(const std::string& path) {
  using namespace wav_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open wav file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail("not a RIFF/WAVE file: " + path);

  std::uint16_t format = 0, num_channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t chunk_len = read_u32(hdr + 4);
    const unsigned char* body = hdr + 8;
    if (pos + 8 + chunk_len > bytes.size())
      chunk_len = static_cast<std::uint32_t>(bytes.size() - pos - 8);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) fail("truncated fmt chunk: " + path);
      format = read_u16(body);
      num_channels = read_u16(body + 2);
      sample_rate = read_u32(body + 4);
      bits = read_u16(body + 14);
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (num_channels == 0 || sample_rate == 0) fail("missing fmt chunk: " + path);
  if (data == nullptr) fail("missing data chunk: " + path);

  const bool pcm16 = (format == 1 && bits == 16);
  const bool float32 = (format == 3 && bits == 32);
  if (!pcm16 && !float32)
    fail("unsupported wav encoding (want pcm16 or float32): " + path);

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t frame_bytes = bytes_per_sample * num_channels;
  const std::size_t num_frames = data_len / frame_bytes;
  if (num_frames == 0) fail("wav file has no samples: " + path);

  AudioBuffer buf;
  buf.sample_rate = static_cast<double>(sample_rate);
  buf.channels.assign(num_channels, std::vector<double>(num_frames));
  for (std::size_t n = 0; n < num_frames; ++n) {
    const unsigned char* frame = data + n * frame_bytes;
    for (int m = 0; m < num_channels; ++m) {
      const unsigned char* s = frame + m * bytes_per_sample;
      if (pcm16) {
        std::int16_t v = static_cast<std::int16_t>(read_u16(s));
        buf.channels[m][n] = static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, s, 4);
        buf.channels[m][n] = static_cast<double>(v);
      }
    }
  }
  return buf;
}

// Writes interleaved multichannel WAV. Float32 is the default so that
// round-trips through files stay within float precision of the in-memory
// signal; pcm16 quantizes.
inline void write_wav(const std::string& path, const AudioBuffer& buf,
                      SampleFormat fmt = SampleFormat::kFloat32) {
  using namespace wav_detail;
  buf.validate();
  const int m_ch = buf.num_channels();
  const std::int64_t n_samp = buf.num_samples();
  const bool is_float = (fmt == SampleFormat::kFloat32);
  const std::uint16_t bytes_per_sample = is_float ? 4 : 2;
  const std::uint32_t data_len =
      static_cast<std::uint32_t>(n_samp * m_ch * bytes_per_sample);
  const std::uint32_t rate = static_cast<std::uint32_t>(std::llround(buf.sample_rate));

  std::vector<unsigned char> out;
  out.reserve(64 + data_len);
  put_tag(&out, "RIFF");
  put_u32(&out, 0);  // patched below
  put_tag(&out, "WAVE");
  put_tag(&out, "fmt ");
  put_u32(&out, 16);
  put_u16(&out, is_float ? 3 : 1);
  put_u16(&out, static_cast<std::uint16_t>(m_ch));
  put_u32(&out, rate);
  put_u32(&out, rate * m_ch * bytes_per_sample);
  put_u16(&out, static_cast<std::uint16_t>(m_ch * bytes_per_sample));
  put_u16(&out, static_cast<std::uint16_t>(8 * bytes_per_sample));
  if (is_float) {
    // non-PCM files carry a fact chunk with the frame count
    put_tag(&out, "fact");
    put_u32(&out, 4);
    put_u32(&out, static_cast<std::uint32_t>(n_samp));
  }
  put_tag(&out, "data");
  put_u32(&out, data_len);

  for (std::int64_t n = 0; n < n_samp; ++n) {
    for (int m = 0; m < m_ch; ++m) {
      double x = buf.channels[m][n];
      if (is_float) {
        float v = static_cast<float>(x);
        unsigned char b[4];
        std::memcpy(b, &v, 4);
        out.insert(out.end(), b, b + 4);
      } else {
        double clamped = std::clamp(x, -1.0, 1.0);
        std::int16_t v = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
        put_u16(&out, static_cast<std::uint16_t>(v));
      }
    }
  }

  const std::uint32_t riff_len = static_cast<std::uint32_t>(out.size() - 8);
  out[4] = static_cast<unsigned char>(riff_len & 0xff);
  out[5] = static_cast<unsigned char>((riff_len >> 8) & 0xff);
  out[6] = static_cast<unsigned char>((riff_len >> 16) & 0xff);
  out[7] = static_cast<unsigned char>((riff_len >> 24) & 0xff);

  std::ofstream os(path, std::ios::binary);
  if (!os) fail("cannot write wav file: " + path);
  os.write(reinterpret_cast<const char*>(out.data()),
           static_cast<std::streamsize>(out.size()));
  if (!os) fail("short write on wav file: " + path);
}

}  // namespace farfield
