#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netpd/agents.hpp"
#include "netpd/game.hpp"
#include "netpd/llm/chat.hpp"

namespace netpd::llm {

// Experimenter texts of the chat protocol. Placeholders are written {name};
// the tutorial binds {cost}, {benefit}, {rounds} and {points_per_dollar};
// feedback sentences bind {action}, {paid}, {gained}, {net}, {label},
// {from_me} and {from_others}.
struct PromptTemplateSet {
  std::string persona_preamble;
  std::vector<std::string> tutorial_steps;
  std::vector<std::string> readiness_checks;
  std::string action_request;
  std::string feedback_self;
  std::string feedback_neighbor;
  std::string feedback_closing;
  std::string clarification;

  static const PromptTemplateSet& defaults();
};

// Replaces every {name} with vars[name]. Unknown placeholders and unbalanced
// braces throw TemplateError.
std::string substitute(const std::string& text, const std::map<std::string, std::string>& vars);

// Preamble, tutorial steps and readiness checks in the order they are sent.
// Each one expects a free-form acknowledgement before the next.
std::vector<std::string> render_opening(const PromptTemplateSet& templates,
                                        const GameParams& params, int announced_rounds);

// Round report ending with the request for the next choice. When
// expected_degree is given, a neighbor count that differs from it, or labels
// that are not 1..k in order, throw TemplateError.
ChatMessage render_feedback(const Observation& obs, const GameParams& params,
                            const PromptTemplateSet& templates = PromptTemplateSet::defaults(),
                            std::optional<std::size_t> expected_degree = std::nullopt);

}  // namespace netpd::llm
