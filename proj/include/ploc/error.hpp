/*
 * Copyright 2026 The ploc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace ploc {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: a schema violation in a bundle or signature, or a bad
/// unified-diff header. `where()` names the offending field or line.
class ParseError : public Error {
public:
  ParseError(std::string where, const std::string &what)
      : Error(where.empty() ? what : where + ": " + what),
        where_(std::move(where)), detail_(what) {}

  const std::string &where() const { return where_; }
  /// The message without the location prefix.
  const std::string &detail() const { return detail_; }

private:
  std::string where_;
  std::string detail_;
};

/// Well-formed input that breaks a cross-reference invariant (dangling
/// successor, duplicate address, call site without a call instruction).
class IntegrityError : public Error {
public:
  using Error::Error;
};

/// Neither reference function yields a patch path.
class UndetectablePatch : public Error {
public:
  using Error::Error;
};

} // namespace ploc
