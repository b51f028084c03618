#pragma once

#include <optional>
#include <string_view>

#include "netpd/game.hpp"

namespace netpd::llm {

// Strict reply rule. After trimming whitespace and punctuation from both ends
// and case-folding, the reply must be exactly "c" or "d"; a reply whose first
// whitespace-delimited token is "C." or "D." also counts. Everything else,
// prose mentioning cooperation included, is ambiguous (nullopt). Never throws.
std::optional<Action> parse_action(std::string_view reply) noexcept;

}  // namespace netpd::llm
