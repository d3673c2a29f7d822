/* Copyright 2026 The OOAL Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef OOAL_CONTAINER_HPP_
#define OOAL_CONTAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ooal {

// Every binary file written by this project starts with these 8 bytes.
inline constexpr std::string_view kContainerMagic = "OOALFT01";

// Little-endian byte sink. Values are encoded explicitly, independent of
// host endianness.
class ByteWriter {
 public:
  void put_bytes(std::string_view bytes);
  void put_u32(std::uint32_t v);
  void put_f64(double v);
  const std::vector<unsigned char>& bytes() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

// Bounds-checked little-endian reader. Running off the end raises
// CorruptionError naming `what`.
class ByteReader {
 public:
  ByteReader(std::vector<unsigned char> data, std::string what)
      : data_(std::move(data)), what_(std::move(what)) {}

  std::string get_bytes(std::size_t n);
  std::uint32_t get_u32();
  double get_f64();
  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& what() const { return what_; }

 private:
  void need(std::size_t n) const;

  std::vector<unsigned char> data_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<unsigned char>& bytes);

// Reads the magic and raises FormatError if it is wrong.
void expect_magic(ByteReader& reader);

}  // namespace ooal

#endif  // OOAL_CONTAINER_HPP_
