// Copyright 2026 The Authors.
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

#include "cd/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "cd/error.hpp"

namespace cd {
namespace {

constexpr char kMagic[4] = {'C', 'D', 'E', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32_le(std::vector<unsigned char>& buf, std::uint32_t v) {
  buf.push_back(static_cast<unsigned char>(v & 0xff));
  buf.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  buf.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  buf.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  if (!m.all_finite())
    fail(ErrorKind::kInvalidInput, "refusing to save non-finite matrix");

  std::vector<unsigned char> buf;
  buf.reserve(16 + m.size() * 4);
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32_le(buf, kVersion);
  put_u32_le(buf, static_cast<std::uint32_t>(m.rows()));
  put_u32_le(buf, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32_le(buf, bits);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kFileError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorKind::kFileError, "short write to " + path.string());
}

Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kFileError, "cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());

  if (buf.size() < 16) fail(ErrorKind::kFormatError, "truncated CDEM header");
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    fail(ErrorKind::kFormatError, "bad CDEM magic");
  const std::uint32_t version = get_u32_le(buf.data() + 4);
  if (version != kVersion)
    fail(ErrorKind::kFormatError, "unsupported CDEM version " + std::to_string(version));
  const std::uint32_t rows = get_u32_le(buf.data() + 8);
  const std::uint32_t cols = get_u32_le(buf.data() + 12);

  const std::size_t expected = 16 + static_cast<std::size_t>(rows) * cols * 4;
  if (buf.size() != expected)
    fail(ErrorKind::kFormatError, "CDEM payload size mismatch: header says " +
                                      std::to_string(rows) + "x" + std::to_string(cols));

  Matrix m(rows, cols);
  const unsigned char* p = buf.data() + 16;
  for (std::size_t i = 0; i < m.size(); ++i, p += 4) {
    const std::uint32_t bits = get_u32_le(p);
    float f;
    std::memcpy(&f, &bits, 4);
    m.data()[i] = static_cast<double>(f);
  }
  if (!m.all_finite()) fail(ErrorKind::kFormatError, "CDEM payload has non-finite values");
  return m;
}

}  // namespace cd
