/*
 * Copyright 2026 The Tessera Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TESSERA_IO_H_
#define TESSERA_IO_H_

#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

namespace tessera {

std::string read_text_file(const std::string& path);
// Creates parent directories as needed.
void write_text_file(const std::string& path, std::string_view contents);

nlohmann::json read_json_file(const std::string& path);
// Pretty-printed with a trailing newline; output is byte-stable.
void write_json_file(const std::string& path, const nlohmann::json& value);

// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);
// Parses a full string as a double; returns false on trailing garbage.
bool parse_double(std::string_view text, double& value);

// JSON encoding of a real that may be non-finite: +inf/-inf become the
// strings "inf"/"-inf", NaN becomes null.
nlohmann::json json_real(double value);
double real_from_json(const nlohmann::json& value);

}  // namespace tessera

#endif  // TESSERA_IO_H_
