/* Copyright 2026 The OOAL Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef OOAL_ERRORS_HPP_
#define OOAL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ooal {

// Base of every error raised by the library. CLI maps any of these to a
// one-line diagnostic and a nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unrecognized file layout (bad magic, unsupported version).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Header and payload disagree, or the file ends early.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in an intermediate or a gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad arguments, unknown ids, invalid configs or manifests.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ooal

#endif  // OOAL_ERRORS_HPP_
