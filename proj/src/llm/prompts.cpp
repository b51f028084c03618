#include "netpd/llm/prompts.hpp"

#include "netpd/errors.hpp"

namespace netpd::llm {

const PromptTemplateSet& PromptTemplateSet::defaults() {
  static const PromptTemplateSet set{
      "Pretend you are a human playing a prisoner's dilemma game in a lab environment. "
      "I will now explain the rules to you, are you ready?",
      {
          "The game will be played over a series of rounds. In every round, you make a choice "
          "about whether to pay to give points to the other players you are connected to. The "
          "game will last for about {rounds} rounds. You will be connected to the same people "
          "every round. We now describe the game in more detail. Are you ready?",

          "In every round, you choose whether to pay to give points to the people you are "
          "connected to. If you choose to cooperate (represented by \"C\"), you pay {cost} points "
          "for each player you are connected to, and each of them gains {benefit} points. If you "
          "choose to defect (represented by \"D\"), you do not pay any points and do not change "
          "the points of the players you are connected to. Each player you are connected to has "
          "the same choice. For each of them that chooses \"C,\" you gain {benefit} points. Once "
          "everyone makes a decision, I will tell you the result of the round. You will be shown "
          "the choices of each player you are connected to and how many points in total you "
          "gained or lost. You will also be shown how many points each player you are connected "
          "to gained or lost in total. These numbers are affected by your choice, their choice, "
          "and also the choices of any other players connected by them who may or may not be "
          "connected to you. Remember, for every {points_per_dollar} points you have at the end "
          "of the game, we will pay you 1 dollar. You should aim to get as many points as you "
          "can. Do you understand?",
      },
      {
          "You have now completed the tutorial. Are you ready to play the game?",
          "Thank you for completing the tutorial. You will now be playing with other "
          "participants. Please only give your choice with \"D\" or \"C.\" Are you ready?",
      },
      "Please make a choice for the first round. Please only reply with \"D\" or \"C.\"",
      "Last round, you chose {action}, paid {paid} points, and gained {gained} points, for a "
      "total of {net} points.",
      "Neighbor {label} chose {action}, paid {paid} points, and gained {from_me} points from you "
      "and {from_others} points from other players, for a total of {net} points.",
      "Please choose D or C for the current round.",
      "Please only reply with 'D' or 'C'.",
  };
  return set;
}

std::string substitute(const std::string& text, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    const auto stray = text.find('}', pos);
    if (stray < open) throw TemplateError("unbalanced '}' in template");
    if (open == std::string::npos) {
      out.append(text, pos, std::string::npos);
      break;
    }
    const auto close = text.find('}', open);
    if (close == std::string::npos) throw TemplateError("unterminated placeholder in template");
    out.append(text, pos, open - pos);
    const std::string name = text.substr(open + 1, close - open - 1);
    auto it = vars.find(name);
    if (it == vars.end()) throw TemplateError("unbound placeholder {" + name + "}");
    out += it->second;
    pos = close + 1;
  }
  return out;
}

std::vector<std::string> render_opening(const PromptTemplateSet& templates,
                                        const GameParams& params, int announced_rounds) {
  const std::map<std::string, std::string> vars{
      {"cost", std::to_string(params.cost_per_edge)},
      {"benefit", std::to_string(params.benefit_per_edge())},
      {"rounds", std::to_string(announced_rounds)},
      {"points_per_dollar", std::to_string(params.points_per_dollar)},
  };
  std::vector<std::string> out;
  out.push_back(substitute(templates.persona_preamble, vars));
  for (const auto& step : templates.tutorial_steps) out.push_back(substitute(step, vars));
  for (const auto& check : templates.readiness_checks) out.push_back(substitute(check, vars));
  return out;
}

ChatMessage render_feedback(const Observation& obs, const GameParams& params,
                            const PromptTemplateSet& templates,
                            std::optional<std::size_t> expected_degree) {
  if (expected_degree && obs.neighbors.size() != *expected_degree) {
    throw TemplateError("observation lists " + std::to_string(obs.neighbors.size()) +
                        " neighbors, expected " + std::to_string(*expected_degree));
  }
  (void)params;
  std::string text = substitute(templates.feedback_self,
                                {{"action", to_string(obs.my_action)},
                                 {"paid", std::to_string(obs.my_paid)},
                                 {"gained", std::to_string(obs.my_gained)},
                                 {"net", std::to_string(obs.my_net)}});
  int expected_label = 1;
  for (const auto& v : obs.neighbors) {
    if (v.label != expected_label++) throw TemplateError("neighbor labels must run 1..k in order");
    text += ' ';
    text += substitute(templates.feedback_neighbor,
                       {{"label", std::to_string(v.label)},
                        {"action", to_string(v.action)},
                        {"paid", std::to_string(v.paid)},
                        {"from_me", std::to_string(v.gained_from_me)},
                        {"from_others", std::to_string(v.gained_from_others)},
                        {"net", std::to_string(v.net)}});
  }
  text += ' ';
  text += templates.feedback_closing;
  return {Role::Experimenter, std::move(text), "engine"};
}

}  // namespace netpd::llm
