// Copyright 2026 The nsx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NSX_CORE_WAV_HPP_
#define NSX_CORE_WAV_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsx {

struct WavData {
  std::vector<float> samples;  // mono, channels averaged on read
  int sample_rate = 0;
};

namespace wav_detail {

inline void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
  b.push_back((v >> 16) & 0xff);
  b.push_back((v >> 24) & 0xff);
}
inline void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}
inline uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
inline uint16_t get_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace wav_detail

// 32-bit float PCM, mono.
inline void write_wav_f32(const std::string& path, const std::vector<float>& samples,
                          int sample_rate) {
  using namespace wav_detail;
  std::vector<uint8_t> b;
  uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 4);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put_u32(b, 4 + 26 + 12 + 8 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E'});
  b.insert(b.end(), {'f', 'm', 't', ' '});
  put_u32(b, 18);
  put_u16(b, 3);  // IEEE float
  put_u16(b, 1);
  put_u32(b, static_cast<uint32_t>(sample_rate));
  put_u32(b, static_cast<uint32_t>(sample_rate * 4));
  put_u16(b, 4);
  put_u16(b, 32);
  put_u16(b, 0);  // cbSize
  b.insert(b.end(), {'f', 'a', 'c', 't'});
  put_u32(b, 4);
  put_u32(b, static_cast<uint32_t>(samples.size()));
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put_u32(b, data_bytes);
  size_t off = b.size();
  b.resize(off + data_bytes);
  std::memcpy(b.data() + off, samples.data(), data_bytes);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

inline void write_wav_pcm16(const std::string& path, const std::vector<float>& samples,
                            int sample_rate) {
  using namespace wav_detail;
  std::vector<uint8_t> b;
  uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put_u32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E'});
  b.insert(b.end(), {'f', 'm', 't', ' '});
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, 1);
  put_u32(b, static_cast<uint32_t>(sample_rate));
  put_u32(b, static_cast<uint32_t>(sample_rate * 2));
  put_u16(b, 2);
  put_u16(b, 16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put_u32(b, data_bytes);
  for (float s : samples) {
    float c = s < -1.f ? -1.f : (s > 1.f ? 1.f : s);
    long v = std::lrintf(c * 32768.f);
    v = v < -32768 ? -32768 : (v > 32767 ? 32767 : v);
    put_u16(b, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

// Reads PCM16/PCM32/float32 WAV; multi-channel input is averaged to mono.
inline WavData read_wav(const std::string& path) {
  using namespace wav_detail;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::vector<uint8_t> b((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
  if (b.size() < 44 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  size_t pos = 12;
  uint16_t fmt = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data_ptr = nullptr;
  uint32_t data_len = 0;
  while (pos + 8 <= b.size()) {
    uint32_t chunk_len = get_u32(b.data() + pos + 4);
    const uint8_t* body = b.data() + pos + 8;
    if (pos + 8 + chunk_len > b.size()) chunk_len = static_cast<uint32_t>(b.size() - pos - 8);
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0 && chunk_len >= 16) {
      fmt = get_u16(body);
      channels = get_u16(body + 2);
      rate = get_u32(body + 4);
      bits = get_u16(body + 14);
      if (fmt == 0xFFFE && chunk_len >= 40) fmt = get_u16(body + 24);  // extensible
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      data_ptr = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  if (!data_ptr || channels == 0) throw std::runtime_error("missing data/fmt chunk: " + path);

  size_t bytes_per = bits / 8;
  size_t frames = data_len / (bytes_per * channels);
  WavData out;
  out.sample_rate = static_cast<int>(rate);
  out.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (uint16_t ch = 0; ch < channels; ++ch) {
      const uint8_t* p = data_ptr + (i * channels + ch) * bytes_per;
      if (fmt == 3 && bits == 32) {
        float v;
        std::memcpy(&v, p, 4);
        acc += v;
      } else if (fmt == 1 && bits == 16) {
        int16_t v = static_cast<int16_t>(get_u16(p));
        acc += v / 32768.0;
      } else if (fmt == 1 && bits == 32) {
        int32_t v = static_cast<int32_t>(get_u32(p));
        acc += v / 2147483648.0;
      } else {
        throw std::runtime_error("unsupported WAV encoding (fmt=" + std::to_string(fmt) +
                                 ", bits=" + std::to_string(bits) + "): " + path);
      }
    }
    out.samples[i] = static_cast<float>(acc / channels);
  }
  return out;
}

}  // namespace nsx

#endif  // NSX_CORE_WAV_HPP_
