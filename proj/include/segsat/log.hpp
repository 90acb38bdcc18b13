// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace segsat {

/// Timestamped line on standard error.
void log_line(const std::string& message);
void set_logging(bool enabled);

}  // namespace segsat
