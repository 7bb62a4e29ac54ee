#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace csynth {

std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);  // trims and squeezes runs of whitespace to one space
std::string ascii_lower(std::string_view s);

// Words of the text split on anything that is not an ASCII letter/digit or a non-ASCII byte.
std::vector<std::string> word_tokens(std::string_view s);

// The last number token in the text (e.g. "Score: 0.9" -> 0.9). Scans from the end.
std::optional<double> parse_last_number(std::string_view text);

// The last YES/NO-style token (yes/no/true/false, case-insensitive) -> true/false.
std::optional<bool> parse_last_yes_no(std::string_view text);

// The last word-token that appears in `choices` (compared lowercase, '-' and ' ' treated as '_').
std::optional<std::string> parse_last_choice(std::string_view text, const std::vector<std::string>& choices);

}  // namespace csynth

namespace csynth {

// Lowercases ASCII letters, removes every ASCII character that is not a letter, digit or
// whitespace, and collapses whitespace. Non-ASCII bytes are kept. Idempotent.
std::string normalize_text(std::string_view s);

// Whitespace tokens of normalize_text(s).
std::vector<std::string> normalized_tokens(std::string_view s);

}  // namespace csynth
