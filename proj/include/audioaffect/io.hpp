// Copyright 2026  audioaffect authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AUDIOAFFECT_IO_HPP_
#define AUDIOAFFECT_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace audioaffect::io {

// Raw little-endian float32 payloads, independent of host byte order.
void write_f32(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

/// 64-bit FNV-1a over the little-endian bytes of a float sequence, as 16 hex
/// digits. Used as a stable identity for parameter sets.
std::string fingerprint(std::span<const float> values);

}  // namespace audioaffect::io

#endif  // AUDIOAFFECT_IO_HPP_
