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

#ifndef TOPICPROBE_ERROR_H_
#define TOPICPROBE_ERROR_H_

#include <stdexcept>
#include <string>

namespace topicprobe {

// Base of all engine errors. The subclasses map onto CLI exit codes:
// ConfigError -> 2, DataError -> 3, NumericError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, ids, positions).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses, degenerate statistics.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace topicprobe

#endif  // TOPICPROBE_ERROR_H_
