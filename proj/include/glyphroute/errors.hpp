// Copyright (C) 2026 The glyphroute authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

// Error taxonomy used across the library. The CLI maps each type to a
// distinct exit code (see tools/main.cpp and README).

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg)
        : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg)
        : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg)
        : std::runtime_error(msg) {}
};

struct PlacementError : std::runtime_error {
    explicit PlacementError(const std::string& msg)
        : std::runtime_error(msg) {}
};

struct ChecksumError : std::runtime_error {
    explicit ChecksumError(const std::string& msg)
        : std::runtime_error(msg) {}
};

// Non-finite activation or loss; carries the location that produced it.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg)
        : std::runtime_error(msg) {}
};

#define GR_CHECK(cond, ExcType, msg)        \
    do {                                    \
        if (!(cond)) throw ExcType(msg);    \
    } while (0)
