// Copyright Contributors to the voxreg project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace voxreg {

/// Malformed or out-of-contract input: bad values, unreadable files, bad JSON.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two objects that must agree in dims, channels or extent do not.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value (loss, gradient, parameter).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace voxreg
