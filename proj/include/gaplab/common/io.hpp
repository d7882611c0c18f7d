/*
 *  Copyright 2026 The GapLab Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gaplab {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);

/// Writes to a sibling temporary and renames it into place.
void write_file_atomic(const fs::path& path, std::string_view content);

/// Parses a JSON document; ParseError carries the file name and line/column.
nlohmann::json read_json_file(const fs::path& path);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const fs::path& path);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

// RFC 4180 CSV with LF line endings.
std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace gaplab
