// src/audio_io.cc

// Copyright 2026  The plcadapt Authors
//
// See ../LICENSE for clarification regarding multiple authors
//
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

#include "plcadapt/audio_io.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "plcadapt/errors.h"
#include "plcadapt/io_util.h"

namespace plcadapt {

namespace {

uint16_t le16(const char* p) {
  return static_cast<uint16_t>(static_cast<uint8_t>(p[0]) |
                               (static_cast<uint8_t>(p[1]) << 8));
}

Waveform downmix(const std::vector<std::vector<double>>& channels, int sample_rate) {
  Waveform w;
  w.sample_rate = sample_rate;
  if (channels.empty()) return w;
  const size_t n = channels[0].size();
  w.samples.assign(n, 0.0);
  for (const auto& ch : channels) {
    for (size_t i = 0; i < n; ++i) w.samples[i] += ch[i];
  }
  if (channels.size() > 1) {
    for (auto& s : w.samples) s /= static_cast<double>(channels.size());
  }
  return w;
}

// MSB-first bit reader over a byte buffer.
class BitReader {
 public:
  BitReader(const std::string& bytes, size_t pos, const std::string& origin)
      : data_(reinterpret_cast<const uint8_t*>(bytes.data())),
        size_(bytes.size()),
        bitpos_(pos * 8),
        origin_(origin) {}

  uint32_t read(int n) {
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | bit();
    return static_cast<uint32_t>(v);
  }
  uint64_t read64(int n) {
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | bit();
    return v;
  }
  int64_t read_signed(int n) {
    if (n == 0) return 0;
    const uint64_t v = read64(n);
    const uint64_t sign = uint64_t{1} << (n - 1);
    return static_cast<int64_t>((v ^ sign)) - static_cast<int64_t>(sign);
  }
  uint32_t unary() {
    uint32_t n = 0;
    while (bit() == 0) ++n;
    return n;
  }
  void align() { bitpos_ = (bitpos_ + 7) / 8 * 8; }
  size_t byte_pos() const { return bitpos_ / 8; }
  bool at_end() const { return bitpos_ >= size_ * 8; }

 private:
  uint32_t bit() {
    if (bitpos_ >= size_ * 8) throw DataError("truncated FLAC stream: " + origin_);
    const uint32_t b = (data_[bitpos_ / 8] >> (7 - bitpos_ % 8)) & 1u;
    ++bitpos_;
    return b;
  }

  const uint8_t* data_;
  size_t size_;
  size_t bitpos_;
  const std::string& origin_;
};

void decode_residual(BitReader& br, int block_size, int order, std::vector<int64_t>& out,
                     const std::string& origin) {
  const uint32_t method = br.read(2);
  if (method > 1) throw DataError("reserved FLAC residual coding method: " + origin);
  const int param_bits = method == 0 ? 4 : 5;
  const uint32_t escape = method == 0 ? 15 : 31;
  const int partition_order = static_cast<int>(br.read(4));
  const int partitions = 1 << partition_order;
  size_t at = static_cast<size_t>(order);
  for (int p = 0; p < partitions; ++p) {
    int count = block_size >> partition_order;
    if (p == 0) count -= order;
    if (count < 0) throw DataError("invalid FLAC residual partition: " + origin);
    const uint32_t param = br.read(param_bits);
    if (param == escape) {
      const int raw_bits = static_cast<int>(br.read(5));
      for (int i = 0; i < count; ++i) out[at++] = br.read_signed(raw_bits);
    } else {
      for (int i = 0; i < count; ++i) {
        const uint64_t q = br.unary();
        const uint64_t u = (q << param) | br.read(static_cast<int>(param));
        out[at++] = static_cast<int64_t>(u >> 1) ^ -static_cast<int64_t>(u & 1);
      }
    }
  }
}

std::vector<int64_t> decode_subframe(BitReader& br, int block_size, int bps,
                                     const std::string& origin) {
  if (br.read(1) != 0) throw DataError("bad FLAC subframe padding bit: " + origin);
  const uint32_t type = br.read(6);
  int wasted = 0;
  if (br.read(1) == 1) wasted = static_cast<int>(br.unary()) + 1;
  bps -= wasted;
  std::vector<int64_t> s(static_cast<size_t>(block_size), 0);
  if (type == 0) {
    const int64_t v = br.read_signed(bps);
    std::fill(s.begin(), s.end(), v);
  } else if (type == 1) {
    for (auto& v : s) v = br.read_signed(bps);
  } else if (type >= 8 && type <= 12) {
    const int order = static_cast<int>(type - 8);
    for (int i = 0; i < order; ++i) s[i] = br.read_signed(bps);
    decode_residual(br, block_size, order, s, origin);
    for (int i = order; i < block_size; ++i) {
      int64_t pred = 0;
      switch (order) {
        case 1: pred = s[i - 1]; break;
        case 2: pred = 2 * s[i - 1] - s[i - 2]; break;
        case 3: pred = 3 * s[i - 1] - 3 * s[i - 2] + s[i - 3]; break;
        case 4: pred = 4 * s[i - 1] - 6 * s[i - 2] + 4 * s[i - 3] - s[i - 4]; break;
        default: break;
      }
      s[i] += pred;
    }
  } else if (type >= 32) {
    const int order = static_cast<int>(type - 31);
    for (int i = 0; i < order; ++i) s[i] = br.read_signed(bps);
    const int precision = static_cast<int>(br.read(4)) + 1;
    if (precision == 16) throw DataError("invalid FLAC LPC precision: " + origin);
    const int shift = static_cast<int>(br.read_signed(5));
    if (shift < 0) throw DataError("negative FLAC LPC shift: " + origin);
    std::vector<int64_t> coefs(static_cast<size_t>(order));
    for (auto& c : coefs) c = br.read_signed(precision);
    decode_residual(br, block_size, order, s, origin);
    for (int i = order; i < block_size; ++i) {
      int64_t acc = 0;
      for (int j = 0; j < order; ++j) acc += coefs[j] * s[i - 1 - j];
      s[i] += acc >> shift;
    }
  } else {
    throw DataError("reserved FLAC subframe type: " + origin);
  }
  if (wasted > 0) {
    for (auto& v : s) v <<= wasted;
  }
  return s;
}

}  // namespace

Waveform decode_wav(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw DataError("not a RIFF/WAVE file: " + origin);
  }
  int format = -1, channels = 0, rate = 0, bits = 0;
  size_t pos = 12;
  const char* data = nullptr;
  size_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    size_t len = get_u32(bytes.data() + pos + 4);
    const size_t body = pos + 8;
    if (body + len > bytes.size()) len = bytes.size() - body;  // tolerate streamed headers
    if (id == "fmt ") {
      if (len < 16) throw DataError("short fmt chunk: " + origin);
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = static_cast<int>(get_u32(bytes.data() + body + 4));
      bits = le16(bytes.data() + body + 14);
      if (format == 0xFFFE && len >= 26) format = le16(bytes.data() + body + 24);
    } else if (id == "data") {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);
  }
  if (format < 0 || data == nullptr) throw DataError("WAV missing fmt or data chunk: " + origin);
  if (channels <= 0) throw DataError("WAV has no channels: " + origin);
  const bool is_float = format == 3;
  if (!(format == 1 || is_float)) {
    throw DataError("unsupported WAV encoding " + std::to_string(format) + ": " + origin);
  }
  if ((is_float && bits != 32 && bits != 64) ||
      (!is_float && bits != 8 && bits != 16 && bits != 24 && bits != 32)) {
    throw DataError("unsupported WAV sample width " + std::to_string(bits) + ": " + origin);
  }
  const size_t width = static_cast<size_t>(bits / 8);
  const size_t frames = data_len / (width * channels);
  std::vector<std::vector<double>> chans(static_cast<size_t>(channels),
                                         std::vector<double>(frames));
  for (size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const char* p = data + (i * channels + c) * width;
      double v = 0.0;
      if (is_float) {
        if (bits == 32) {
          v = get_f32(p);
        } else {
          double d;
          std::memcpy(&d, p, 8);
          v = d;
        }
      } else if (bits == 8) {
        v = (static_cast<uint8_t>(p[0]) - 128.0) / 128.0;
      } else if (bits == 16) {
        v = static_cast<int16_t>(le16(p)) / 32768.0;
      } else if (bits == 24) {
        int32_t x = static_cast<uint8_t>(p[0]) | (static_cast<uint8_t>(p[1]) << 8) |
                    (static_cast<int32_t>(static_cast<int8_t>(p[2])) << 16);
        v = x / 8388608.0;
      } else {
        v = static_cast<int32_t>(get_u32(p)) / 2147483648.0;
      }
      chans[c][i] = v;
    }
  }
  return downmix(chans, rate);
}

Waveform decode_flac(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "fLaC") != 0) {
    throw DataError("not a FLAC file: " + origin);
  }
  size_t pos = 4;
  int rate = 0, channels = 0, bps = 0;
  uint64_t total = 0;
  bool last = false;
  while (!last) {
    if (pos + 4 > bytes.size()) throw DataError("truncated FLAC metadata: " + origin);
    const auto hdr = static_cast<uint8_t>(bytes[pos]);
    last = (hdr & 0x80) != 0;
    const int type = hdr & 0x7f;
    const size_t len = (static_cast<uint8_t>(bytes[pos + 1]) << 16) |
                       (static_cast<uint8_t>(bytes[pos + 2]) << 8) |
                       static_cast<uint8_t>(bytes[pos + 3]);
    pos += 4;
    if (type == 0) {
      BitReader br(bytes, pos, origin);
      br.read(16);
      br.read(16);
      br.read(24);
      br.read(24);
      rate = static_cast<int>(br.read(20));
      channels = static_cast<int>(br.read(3)) + 1;
      bps = static_cast<int>(br.read(5)) + 1;
      total = br.read64(36);
    }
    pos += len;
  }
  if (rate == 0) throw DataError("FLAC stream has no STREAMINFO: " + origin);

  std::vector<std::vector<double>> out(static_cast<size_t>(channels));
  const double full_scale = std::ldexp(1.0, bps - 1);
  BitReader br(bytes, pos, origin);
  while (!br.at_end() && (total == 0 || out[0].size() < total)) {
    if (br.read(14) != 0x3FFE) throw DataError("lost FLAC frame sync: " + origin);
    br.read(1);
    br.read(1);  // blocking strategy
    const uint32_t bs_code = br.read(4);
    const uint32_t sr_code = br.read(4);
    const uint32_t ch_code = br.read(4);
    const uint32_t ss_code = br.read(3);
    br.read(1);
    // UTF-8 style coded frame/sample number.
    uint32_t first = br.read(8);
    int extra = 0;
    if ((first & 0x80) != 0) {
      while ((first & (0x80u >> (extra + 1))) != 0) ++extra;
    }
    for (int i = 0; i < extra; ++i) br.read(8);
    int block_size = 0;
    if (bs_code == 1) block_size = 192;
    else if (bs_code >= 2 && bs_code <= 5) block_size = 576 << (bs_code - 2);
    else if (bs_code == 6) block_size = static_cast<int>(br.read(8)) + 1;
    else if (bs_code == 7) block_size = static_cast<int>(br.read(16)) + 1;
    else if (bs_code >= 8) block_size = 256 << (bs_code - 8);
    else throw DataError("reserved FLAC block size: " + origin);
    if (sr_code == 12) br.read(8);
    else if (sr_code == 13 || sr_code == 14) br.read(16);
    int frame_bps = bps;
    switch (ss_code) {
      case 1: frame_bps = 8; break;
      case 2: frame_bps = 12; break;
      case 4: frame_bps = 16; break;
      case 5: frame_bps = 20; break;
      case 6: frame_bps = 24; break;
      case 7: frame_bps = 32; break;
      default: break;
    }
    br.read(8);  // header CRC-8
    const int n_ch = ch_code < 8 ? static_cast<int>(ch_code) + 1 : 2;
    if (n_ch != channels) throw DataError("FLAC channel count changed mid-stream: " + origin);
    std::vector<std::vector<int64_t>> sub(static_cast<size_t>(n_ch));
    for (int c = 0; c < n_ch; ++c) {
      int sub_bps = frame_bps;
      if ((ch_code == 8 && c == 1) || (ch_code == 9 && c == 0) || (ch_code == 10 && c == 1)) {
        ++sub_bps;  // side channel
      }
      sub[c] = decode_subframe(br, block_size, sub_bps, origin);
    }
    br.align();
    br.read(16);  // frame CRC-16
    for (int i = 0; i < block_size; ++i) {
      int64_t l = 0, r = 0;
      if (ch_code == 8) {
        l = sub[0][i];
        r = l - sub[1][i];
      } else if (ch_code == 9) {
        r = sub[1][i];
        l = sub[0][i] + r;
      } else if (ch_code == 10) {
        const int64_t side = sub[1][i];
        const int64_t mid = (sub[0][i] * 2) | (side & 1);
        l = (mid + side) >> 1;
        r = (mid - side) >> 1;
      }
      for (int c = 0; c < n_ch; ++c) {
        int64_t v = sub[c][i];
        if (ch_code >= 8) v = c == 0 ? l : r;
        out[c].push_back(static_cast<double>(v) / full_scale);
      }
    }
  }
  if (total != 0) {
    for (auto& ch : out) ch.resize(std::min<size_t>(ch.size(), total));
  }
  return downmix(out, rate);
}

Waveform read_audio(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.compare(0, 4, "RIFF") == 0) return decode_wav(bytes, path.string());
  if (bytes.compare(0, 4, "fLaC") == 0) return decode_flac(bytes, path.string());
  throw DataError("unrecognized audio format (expected WAV or FLAC): " + path.string());
}

std::string encode_wav(const Waveform& w) {
  const uint32_t n = static_cast<uint32_t>(w.samples.size());
  std::string out = "RIFF";
  put_u32(out, 36 + n * 2);
  out += "WAVEfmt ";
  put_u32(out, 16);
  out.push_back(1); out.push_back(0);  // PCM
  out.push_back(1); out.push_back(0);  // mono
  put_u32(out, static_cast<uint32_t>(w.sample_rate));
  put_u32(out, static_cast<uint32_t>(w.sample_rate) * 2);
  out.push_back(2); out.push_back(0);
  out.push_back(16); out.push_back(0);
  out += "data";
  put_u32(out, n * 2);
  for (double s : w.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    const auto v = static_cast<int16_t>(std::lround(c * 32767.0));
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  write_file_atomic(path, encode_wav(w));
}

}  // namespace plcadapt
