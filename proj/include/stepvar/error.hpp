// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stepvar {

/// Thrown when an argument violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Wraps a failure raised while processing one scale of a pipeline run.
class ScaleError : public std::runtime_error {
public:
    ScaleError(std::size_t scale, const std::string& what)
        : std::runtime_error("scale " + std::to_string(scale) + ": " + what), m_scale(scale) {}

    std::size_t scale() const noexcept { return m_scale; }

private:
    std::size_t m_scale;
};

}  // namespace stepvar
