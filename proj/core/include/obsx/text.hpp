// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace obsx {

/// Lowercases ASCII letters; bytes outside A-Z are left untouched.
std::string to_lower_ascii(std::string_view s);

/// Strips leading and trailing ASCII whitespace.
std::string trim(std::string_view s);

/// Shared tokenizer for lexical scoring, Jaccard overlap, and the local
/// hash embedder: lowercase, split on any run of non-alphanumeric bytes,
/// drop empty tokens. Non-ASCII bytes count as separators.
std::vector<std::string> tokenize(std::string_view text);

/// tokenize() collapsed to a set.
std::set<std::string> token_set(std::string_view text);

/// Whitespace-separated word count (used for transcript-length stats,
/// intentionally looser than tokenize()).
std::size_t word_count(std::string_view text);

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);

/// Fixed-width lowercase hex of a 64-bit value.
std::string hex64(std::uint64_t v);

/// Shortest round-trip decimal form of a double; integral values are
/// rendered without a decimal point ("95", not "95.0").
std::string format_double(double v);

/// Replaces every "{{key}}" with the mapped value. Single pass over the
/// template, so substituted content is never re-scanned.
std::string substitute_placeholders(std::string_view tmpl,
                                    const std::vector<std::pair<std::string, std::string>>& values);

/// Placeholder names appearing as {{name}} in a template.
std::vector<std::string> placeholder_names(std::string_view tmpl);

}  // namespace obsx
