// Copyright 2026 The entrynav Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Optical-flow magnitude, top-k salient masks and masked-pixel extraction.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entrynav/error.hpp"
#include "entrynav/io.hpp"

namespace entrynav {

struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;  // row-major, pixels
  std::vector<float> v;

  FlowField() = default;
  FlowField(int w, int h) : width(w), height(h), u(pixels(), 0.0f), v(pixels(), 0.0f) {}

  std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

  void validate() const {
    if (width <= 0 || height <= 0) throw DomainError("FlowField: dimensions must be positive");
    if (u.size() != pixels() || v.size() != pixels()) throw DomainError("FlowField: component size mismatch");
    for (std::size_t i = 0; i < pixels(); ++i)
      if (!std::isfinite(u[i]) || !std::isfinite(v[i])) throw DomainError("FlowField: non-finite value");
  }
};

struct MagnitudeMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major
};

struct SalientMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1
  std::size_t k = 0;

  std::size_t popcount() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
};

inline MagnitudeMap flow_magnitude(const FlowField& f) {
  f.validate();
  MagnitudeMap m{f.width, f.height, std::vector<double>(f.pixels())};
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = std::hypot<double>(f.u[i], f.v[i]);
  return m;
}

/// Number of pixels a ratio selects: floor(ratio * pixels), at least 1.
inline std::size_t mask_count(std::size_t pixels, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw DomainError("topk_mask: ratio must lie in (0, 1]");
  // The epsilon keeps products like 0.1 * 1000 from flooring to 99.
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(pixels) + 1e-9));
  return std::clamp<std::size_t>(k, 1, pixels);
}

/// Marks the k largest magnitudes. Pixels tied with the k-th largest value
/// are taken in row-major order until k bits are set.
inline SalientMask topk_mask(const MagnitudeMap& m, double ratio) {
  const std::size_t n = m.values.size();
  if (m.width <= 0 || m.height <= 0 || n != static_cast<std::size_t>(m.width) * m.height)
    throw DomainError("topk_mask: malformed magnitude map");
  const std::size_t k = mask_count(n, ratio);

  SalientMask mask{m.width, m.height, std::vector<std::uint8_t>(n, 0), k};
  if (k == n) {
    std::fill(mask.bits.begin(), mask.bits.end(), std::uint8_t{1});
    return mask;
  }
  std::vector<double> scratch(m.values);
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end(),
                   std::greater<>());
  const double threshold = scratch[k - 1];
  std::size_t above = 0;
  for (double x : m.values) above += x > threshold;
  std::size_t ties_left = k - above;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = m.values[i];
    if (x > threshold) {
      mask.bits[i] = 1;
    } else if (x == threshold && ties_left > 0) {
      mask.bits[i] = 1;
      --ties_left;
    }
  }
  return mask;
}

/// Values under set mask bits, row-major.
template <typename T>
std::vector<T> masked_extract(std::span<const T> image, int width, int height, const SalientMask& mask) {
  if (width != mask.width || height != mask.height ||
      image.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) ||
      mask.bits.size() != image.size())
    throw DomainError("masked_extract: image and mask dimensions differ");
  std::vector<T> out;
  out.reserve(mask.k);
  for (std::size_t i = 0; i < image.size(); ++i)
    if (mask.bits[i]) out.push_back(image[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Middlebury .flo and PBM masks

inline constexpr float kFloMagic = 202021.25f;

inline std::string encode_flo(const FlowField& f) {
  f.validate();
  std::string out;
  out.reserve(12 + f.pixels() * 8);
  io::put_le<float>(out, kFloMagic);
  io::put_le<std::int32_t>(out, f.width);
  io::put_le<std::int32_t>(out, f.height);
  for (std::size_t i = 0; i < f.pixels(); ++i) {
    io::put_le<float>(out, f.u[i]);
    io::put_le<float>(out, f.v[i]);
  }
  return out;
}

inline FlowField decode_flo(std::string_view bytes) {
  io::ByteReader in(bytes);
  if (in.remaining() < 12 || in.get_le<float>() != kFloMagic) throw FormatError(".flo: bad magic");
  const auto w = in.get_le<std::int32_t>();
  const auto h = in.get_le<std::int32_t>();
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) throw FormatError(".flo: bad dimensions");
  FlowField f(w, h);
  if (in.remaining() != f.pixels() * 8) throw FormatError(".flo: payload size mismatch");
  for (std::size_t i = 0; i < f.pixels(); ++i) {
    f.u[i] = in.get_le<float>();
    f.v[i] = in.get_le<float>();
  }
  try {
    f.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string(".flo: ") + e.what());
  }
  return f;
}

inline void write_flo(const std::filesystem::path& path, const FlowField& f) {
  io::write_file_atomic(path, encode_flo(f));
}

inline FlowField read_flo(const std::filesystem::path& path) { return decode_flo(io::read_file(path)); }

/// PBM P4; a set bit is written as black (1).
inline std::string encode_pbm(const SalientMask& m) {
  std::string out = "P4\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n";
  const std::size_t stride = (static_cast<std::size_t>(m.width) + 7) / 8;
  for (int row = 0; row < m.height; ++row) {
    std::string line(stride, '\0');
    for (int col = 0; col < m.width; ++col)
      if (m.bits[static_cast<std::size_t>(row) * m.width + col])
        line[static_cast<std::size_t>(col) / 8] |= static_cast<char>(0x80u >> (col % 8));
    out += line;
  }
  return out;
}

inline SalientMask decode_pbm(std::string_view bytes) {
  io::ByteReader in(bytes);
  if (in.line() != "P4") throw FormatError("PBM: expected P4");
  SalientMask m;
  const std::string dims(in.line());
  if (std::sscanf(dims.c_str(), "%d %d", &m.width, &m.height) != 2 || m.width <= 0 || m.height <= 0)
    throw FormatError("PBM: bad dimensions");
  const std::size_t stride = (static_cast<std::size_t>(m.width) + 7) / 8;
  if (in.remaining() != stride * m.height) throw FormatError("PBM: payload size mismatch");
  m.bits.assign(static_cast<std::size_t>(m.width) * m.height, 0);
  for (int row = 0; row < m.height; ++row) {
    const std::string_view line = in.take(stride);
    for (int col = 0; col < m.width; ++col)
      m.bits[static_cast<std::size_t>(row) * m.width + col] =
          (static_cast<unsigned char>(line[static_cast<std::size_t>(col) / 8]) >> (7 - col % 8)) & 1u;
  }
  m.k = m.popcount();
  return m;
}

inline nlohmann::json mask_sidecar(const SalientMask& m, double ratio) {
  return {{"k", m.k}, {"ratio", ratio}, {"width", m.width}, {"height", m.height}};
}

}  // namespace entrynav
