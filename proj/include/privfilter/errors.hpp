//
// Copyright 2026 The privfilter Authors
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
//

#pragma once

#include <stdexcept>
#include <string>

namespace privfilter {

// Every failure raised by the library derives from Error so callers can
// catch the whole family at once and still dispatch on the concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A model whose second moments vanish or whose dependence measure is undefined.
class DegenerateModel : public Error {
 public:
  using Error::Error;
};

// A conditional density requested at a point outside the support of X.
class UnsupportedPoint : public Error {
 public:
  using Error::Error;
};

// Quadrature, iteration or root search failed to meet its tolerance.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

// A monotone target function saturates below the requested level.
class TargetUnreachable : public Error {
 public:
  using Error::Error;
};

// Privacy level outside the admissible range of the tradeoff.
class EpsOutOfRange : public Error {
 public:
  using Error::Error;
};

// Operation defined only for a subset of model kinds.
class ModelNotSupported : public Error {
 public:
  using Error::Error;
};

// Malformed model specification or CLI argument. `key` names the offender.
class ParseError : public Error {
 public:
  ParseError(std::string key, const std::string& what)
      : Error("invalid '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace privfilter
