/* Copyright (c) 2026 The i2imix Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <stdexcept>
#include <string>

namespace i2imix {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad arguments to an operation (shape mismatch, empty input, invalid budget, ...).
struct InvalidInputError : Error {
  explicit InvalidInputError(const std::string& msg) : Error(msg) {}
};

/// Invalid or inconsistent configuration values.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Filesystem / format failures.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Runtime failures mid-computation (non-finite losses, broken state).
struct RuntimeFailure : Error {
  explicit RuntimeFailure(const std::string& msg) : Error(msg) {}
};

}  // namespace i2imix
