// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace partlat {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto exit codes (usage = 1, input = 2, numeric = 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input: files, configuration, ids.
class InputError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace partlat
