#pragma once

#include <optional>
#include <string>

namespace ptbench {

// Answer extraction from generated text.
//
// Strict: the integer immediately following the final "####" marker; absent
// if the final marker is missing or not followed by an integer.
// Flexible: the last integer literal appearing anywhere in the text.
//
// Absence is a value, not an error.
std::optional<long long> extract_strict(const std::string& text);
std::optional<long long> extract_flexible(const std::string& text);

}  // namespace ptbench
