#include "netpd/llm/parse.hpp"

#include <cctype>

namespace netpd::llm {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_trimmable(char c) {
  return is_space(c) || std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::optional<Action> letter(char c) {
  switch (c) {
    case 'c': case 'C': return Action::Cooperate;
    case 'd': case 'D': return Action::Defect;
    default: return std::nullopt;
  }
}

}  // namespace

std::optional<Action> parse_action(std::string_view reply) noexcept {
  std::string_view core = reply;
  while (!core.empty() && is_trimmable(core.front())) core.remove_prefix(1);
  while (!core.empty() && is_trimmable(core.back())) core.remove_suffix(1);
  if (core.size() == 1) return letter(core.front());

  std::string_view first = reply;
  while (!first.empty() && is_space(first.front())) first.remove_prefix(1);
  std::size_t end = 0;
  while (end < first.size() && !is_space(first[end])) ++end;
  first = first.substr(0, end);
  if (first.size() == 2 && first[1] == '.') return letter(first[0]);
  return std::nullopt;
}

}  // namespace netpd::llm
