// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ddose::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

bool contains_ci(std::string_view haystack, std::string_view needle);

/// Lowercase, strip punctuation to spaces, split on whitespace.
std::vector<std::string> tokenize(std::string_view s);

/// Whole-token matching: true when `term`'s token sequence appears as a
/// contiguous run inside `candidate`'s tokens. "prostate cancer" matches
/// "Metastatic Prostate Cancer" but not "prostatectomy cancer study".
bool token_phrase_match(std::string_view term, std::string_view candidate);

/// FNV-1a 64-bit, hex-encoded. Stable across platforms and runs.
std::string fnv1a_hex(std::string_view data);

std::vector<std::string> split_lines(std::string_view s);

}  // namespace ddose::text
