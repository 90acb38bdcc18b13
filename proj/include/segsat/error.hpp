// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace segsat {

/// Caller supplied something the contract rejects (bad shape, bad id, bad range).
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// A file could not be read back into a valid object.
class LoadError : public std::runtime_error {
 public:
  explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

/// A relative metric whose reference denominator is zero.
class UndefinedMetricError : public std::domain_error {
 public:
  explicit UndefinedMetricError(const std::string& what) : std::domain_error(what) {}
};

/// Configuration file or flag that violates a RunConfig/ModelConfig invariant.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace segsat
