// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sentinel::text {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_shortest(double value);

/// Decimal text with 17 significant digits.
std::string format_precise(double value);

std::optional<double> parse_double(std::string_view token);
std::optional<std::uint64_t> parse_uint(std::string_view token);

/// Splits on single spaces. Empty tokens (double spaces, leading/trailing
/// space) are preserved so callers can reject them.
std::vector<std::string_view> split(std::string_view line, char sep = ' ');

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace sentinel::text
