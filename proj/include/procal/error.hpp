// Copyright 2026 The procal-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace procal {

/// Root of every error thrown by this library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// An argument outside the mathematical domain of an operation.
class DomainError : public Error
{
public:
  using Error::Error;
};

/// Malformed or inconsistent user input (configuration, files, flags).
class ValidationError : public Error
{
public:
  using Error::Error;
};

/// A transport session was driven out of its Start (Write)* Stop order.
class ProtocolError : public Error
{
public:
  using Error::Error;
};

/// The transport backend failed to acknowledge a request.
class TransportError : public Error
{
public:
  using Error::Error;
};

/// A pipeline stage could not produce its result (e.g. a rank-deficient fit).
class PipelineError : public Error
{
public:
  using Error::Error;
};

}  // namespace procal
