// Copyright 2026 The topicprobe Authors.
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

#ifndef TOPICPROBE_UTIL_H_
#define TOPICPROBE_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace topicprobe {

// ASCII case folding; bytes outside A-Z (including UTF-8 sequences) pass
// through unchanged.
std::string to_lower(std::string_view text);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

// Fixed-precision rendering for human-facing tables.
std::string format_fixed(double value, int digits);

std::string sha1_hex(std::string_view bytes);

// Hash of a file as `git hash-object` computes it.
std::string git_blob_hash(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

uint32_t crc32_of(std::span<const std::byte> bytes, uint32_t crc = 0);

std::vector<std::string> split(std::string_view text, char sep);

}  // namespace topicprobe

#endif  // TOPICPROBE_UTIL_H_
