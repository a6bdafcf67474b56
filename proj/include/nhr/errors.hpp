// Copyright 2026 The NHR Authors.
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

#pragma once

#include <stdexcept>
#include <string>

namespace nhr {

// Base for every error raised by the library. The CLI maps subclasses onto
// process exit codes (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Index outside an embedding table, entity range, or remap table.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameters, weights, or configuration files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or empty input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Operation called out of order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// Negative sampling cannot be satisfied for some user.
class SamplingError : public DataError {
 public:
  using DataError::DataError;
};

// Evaluation protocol violated (missing test item, missing user, stale
// artifacts).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Bad magic, version, kind tag, or truncated checkpoint file.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or parameter during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace nhr
