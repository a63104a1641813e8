/* Copyright 2026 The optofluid Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace optofluid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a formula (e.g. 1/omega at omega = 0).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A numerical precondition (step size, grid compatibility, ...) is violated.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Iteration failed to converge, or a solution blew up.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The physics forbids the requested operation: unstable mechanics,
/// Euclidean signature, collapse of an attractive ground state.
class PhysicsGateError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent binary file.
class FormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace optofluid
