#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "netpd/game.hpp"
#include "netpd/llm/chat.hpp"
#include "netpd/llm/prompts.hpp"

namespace netpd::llm {

// A round allows three attempts: the action request itself and two
// clarifications. The third ambiguous reply fails the run.
inline constexpr int kMaxRectificationAttempts = 3;

struct RectificationState {
  enum class Outcome { Pending, Resolved, Failed };

  // Ambiguous replies received so far this round.
  int attempts_used = 0;
  Outcome outcome = Outcome::Pending;
  std::optional<Action> action;

  bool resolved() const noexcept { return outcome == Outcome::Resolved; }
  bool failed() const noexcept { return outcome == Outcome::Failed; }
};

// Operator hook into one agent's dialogue. While the dialogue is flagged as
// ambiguous, an operator may supply the text of the next clarification.
class DialogueControl {
 public:
  enum class InjectResult { Accepted, NotFlagged, Gone };
  // Called with (attempts_used, failed) whenever the dialogue is flagged.
  using Listener = std::function<void(int, bool)>;

  void set_listener(Listener listener);

  InjectResult inject(std::string text);
  bool flagged() const;
  int attempts_used() const;

  void flag(int attempts_used);
  void clear();
  void mark_failed();
  // Waits up to `window` for an injection and consumes it.
  std::optional<std::string> take_injection(std::chrono::milliseconds window);

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool flagged_ = false;
  bool failed_ = false;
  int attempts_ = 0;
  std::optional<std::string> injected_;
  Listener listener_;
};

// One agent's conversation: the message history plus where to log it.
class Dialogue {
 public:
  Dialogue(std::string agent_id, std::shared_ptr<ChatClient> client,
           std::shared_ptr<Transcript> transcript, std::shared_ptr<DialogueControl> control,
           PromptTemplateSet templates = PromptTemplateSet::defaults(),
           std::chrono::milliseconds operator_window = std::chrono::milliseconds(0));

  // Appends the message, asks the provider, appends and returns the reply.
  ChatMessage send(ChatMessage message, int round);

  const std::vector<ChatMessage>& history() const noexcept { return history_; }
  const PromptTemplateSet& templates() const noexcept { return templates_; }
  DialogueControl* control() const noexcept { return control_.get(); }
  std::chrono::milliseconds operator_window() const noexcept { return window_; }
  const std::string& agent_id() const noexcept { return agent_id_; }

 private:
  std::string agent_id_;
  std::shared_ptr<ChatClient> client_;
  std::shared_ptr<Transcript> transcript_;
  std::shared_ptr<DialogueControl> control_;
  PromptTemplateSet templates_;
  std::chrono::milliseconds window_;
  std::vector<ChatMessage> history_;
};

// Continues a round whose last reply was ambiguous: counts that reply, then
// either fails (third ambiguous reply) or sends a clarification (the canned
// text or an operator injection) and reparses, repeating as needed.
RectificationState rectify(Dialogue& dialogue, RectificationState state, int round);

// Sends `prompt` and resolves the reply, entering rectify() on ambiguity.
RectificationState request_action(Dialogue& dialogue, const std::string& prompt, int round);

}  // namespace netpd::llm
