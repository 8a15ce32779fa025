// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "obsx/text.hpp"

using namespace obsx;

TEST_CASE("tokenize lowercases and splits on non-alphanumeric runs") {
    CHECK(tokenize("Nausea and vomiting!") == std::vector<std::string>{"nausea", "and", "vomiting"});
    CHECK(tokenize("O2-sat: 95%") == std::vector<std::string>{"o2", "sat", "95"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("!!! --- ...") == std::vector<std::string>{});
    CHECK(tokenize("a1 b2\tc3\nd4") == std::vector<std::string>{"a1", "b2", "c3", "d4"});
}

TEST_CASE("word_count is whitespace-based") {
    CHECK(word_count("") == 0);
    CHECK(word_count("one") == 1);
    CHECK(word_count("  leading and   trailing  ") == 3);
    CHECK(word_count("O2-sat: 95%") == 2);  // looser than tokenize
}

TEST_CASE("format_double renders integral values without a decimal point") {
    CHECK(format_double(95.0) == "95");
    CHECK(format_double(-3.0) == "-3");
    CHECK(format_double(37.5) == "37.5");
    CHECK(format_double(0.0) == "0");
}

TEST_CASE("placeholder substitution is single pass") {
    CHECK(substitute_placeholders("a {{x}} b", {{"x", "X"}}) == "a X b");
    // substituted content is not re-scanned
    CHECK(substitute_placeholders("{{x}}", {{"x", "{{y}}"}, {"y", "BAD"}}) == "{{y}}");
    // unknown placeholders are left in place
    CHECK(substitute_placeholders("{{nope}}", {{"x", "X"}}) == "{{nope}}");
    CHECK(placeholder_names("{{a}} text {{b}}") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("trim strips ascii whitespace") {
    CHECK(trim("  x  ") == "x");
    CHECK(trim("\t\r\n") == "");
    CHECK(trim("a b") == "a b");
}

TEST_CASE("fnv1a64 matches the reference constants") {
    // Published FNV-1a test vectors.
    CHECK(fnv1a64("") == 14695981039346656037ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
