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

#ifndef TESSERA_ERROR_H_
#define TESSERA_ERROR_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tessera {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Raised by optimizers and training loops. `step` is the optimizer step or
// epoch index at which the failure was detected.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::int64_t step)
      : Error(what + " (at step " + std::to_string(step) + ")"), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

// Non-finite activations inside a network. `layer` is the zero-based layer
// whose pre-activation went non-finite.
class ModelError : public Error {
 public:
  ModelError(const std::string& what, int layer)
      : Error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace tessera

#endif  // TESSERA_ERROR_H_
