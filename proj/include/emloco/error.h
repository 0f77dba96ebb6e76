// Copyright 2026 The emloco Authors
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

#ifndef EMLOCO_ERROR_H_
#define EMLOCO_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emloco {

// Base for every error raised by the library. The CLI maps subclasses onto
// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatches, out-of-range arguments and malformed inputs.
class InputError : public Error {
 public:
  using Error::Error;
};

// Text that could not be parsed. `line` is 1-based; 0 when not applicable.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InputError(line == 0 ? what
                             : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration documents or parameter combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced during a computation. `layer` is the offending
// network layer, or -1 when the failure is not tied to one.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int layer = -1)
      : Error(layer < 0 ? what
                        : what + " (layer " + std::to_string(layer) + ")"),
        layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_;
};

}  // namespace emloco

#endif  // EMLOCO_ERROR_H_
