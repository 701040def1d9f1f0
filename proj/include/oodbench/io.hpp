// Copyright 2026 The oodbench Authors
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

#ifndef OODBENCH_IO_HPP_
#define OODBENCH_IO_HPP_

// Binary containers. Every file has the same 16-byte prefix:
//
//   offset 0   4 bytes   magic ("OODP" pack, "OODH" head, "OODS" fitted
//                        state, "OODV" score vector)
//   offset 4   u32 LE    format version (currently 1)
//   offset 8   u64 LE    header length in bytes
//   offset 16  UTF-8 JSON header
//   then       row-major little-endian tensors
//
// Packs and heads store float32 tensors (labels int32); fitted states and
// score vectors store float64. Readers check magic, version and the exact
// byte-length equation before allocating any tensor.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "oodbench/scorers.hpp"
#include "oodbench/types.hpp"

namespace oodbench::io {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kPrefixBytes = 16;

class FormatError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, UnsupportedVersion, Truncated, LengthMismatch, BadHeader, Io };

  FormatError(Kind kind, std::uint64_t offset, const std::string& message);

  Kind kind() const { return kind_; }
  std::uint64_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::uint64_t offset_;
};

std::string_view to_string(FormatError::Kind kind);

std::vector<std::uint8_t> encode_pack(const FeaturePack& pack);
FeaturePack decode_pack(std::span<const std::uint8_t> bytes);
FeaturePack read_pack(const std::filesystem::path& path);
void write_pack(const FeaturePack& pack, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_head(const ClassifierHead& head);
ClassifierHead decode_head(std::span<const std::uint8_t> bytes);
ClassifierHead read_head(const std::filesystem::path& path);
void write_head(const ClassifierHead& head, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_state(const FittedScorer& scorer);
FittedScorer decode_state(std::span<const std::uint8_t> bytes);
FittedScorer read_state(const std::filesystem::path& path);
void write_state(const FittedScorer& scorer, const std::filesystem::path& path);
/// "<method>.state"
std::string state_file_name(Method method);

std::vector<std::uint8_t> encode_scores(const ScoreVector& scores);
ScoreVector decode_scores(std::span<const std::uint8_t> bytes);
ScoreVector read_scores(const std::filesystem::path& path);
void write_scores(const ScoreVector& scores, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace oodbench::io

#endif  // OODBENCH_IO_HPP_
