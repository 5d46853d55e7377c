// Copyright 2026 The splitmc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace splitmc {

// Base of every library failure. Callers that only care about "it broke"
// catch this; the CLI maps the two subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical or structural failure while analysing a chain (reducible
// chain, absolute-continuity violation, optimizer non-convergence, ...).
class AnalysisError : public Error {
 public:
  using Error::Error;
};

// Invalid input: malformed generator, bad decomposition, bad config value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace splitmc
