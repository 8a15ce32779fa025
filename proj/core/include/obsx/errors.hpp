// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace obsx {

/// Base class for all obsx errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Schema or dataset file could not be loaded or failed validation.
struct LoadError : Error {
    using Error::Error;
};

/// Invalid or inconsistent configuration (bad bounds, dim mismatch, ...).
struct ConfigError : Error {
    using Error::Error;
};

/// A remote call failed after exhausting the retry budget.
struct TransportError : Error {
    TransportError(const std::string& what, int attempts_made)
        : Error(what), attempts(attempts_made) {}
    int attempts = 0;
};

/// The remote service answered, but not in the expected shape.
struct ProtocolError : Error {
    using Error::Error;
};

/// A rendered prompt exceeded the configured character ceiling.
struct PromptSizeError : Error {
    PromptSizeError(const std::string& what, std::string section_name)
        : Error(what), section(std::move(section_name)) {}
    std::string section;
};

}  // namespace obsx
