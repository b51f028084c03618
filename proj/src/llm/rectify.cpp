#include "netpd/llm/rectify.hpp"

#include "netpd/errors.hpp"
#include "netpd/llm/parse.hpp"

namespace netpd::llm {

DialogueControl::InjectResult DialogueControl::inject(std::string text) {
  std::lock_guard lock(mu_);
  if (failed_) return InjectResult::Gone;
  if (!flagged_ || text.empty()) return InjectResult::NotFlagged;
  injected_ = std::move(text);
  cv_.notify_all();
  return InjectResult::Accepted;
}

bool DialogueControl::flagged() const {
  std::lock_guard lock(mu_);
  return flagged_;
}

int DialogueControl::attempts_used() const {
  std::lock_guard lock(mu_);
  return attempts_;
}

void DialogueControl::set_listener(Listener listener) {
  std::lock_guard lock(mu_);
  listener_ = std::move(listener);
}

void DialogueControl::flag(int attempts_used) {
  Listener listener;
  {
    std::lock_guard lock(mu_);
    flagged_ = true;
    failed_ = false;
    attempts_ = attempts_used;
    listener = listener_;
  }
  if (listener) listener(attempts_used, false);
}

void DialogueControl::clear() {
  std::lock_guard lock(mu_);
  flagged_ = false;
  failed_ = false;
  attempts_ = 0;
  injected_.reset();
}

void DialogueControl::mark_failed() {
  Listener listener;
  {
    std::lock_guard lock(mu_);
    flagged_ = false;
    failed_ = true;
    attempts_ = kMaxRectificationAttempts;
    injected_.reset();
    listener = listener_;
  }
  if (listener) listener(kMaxRectificationAttempts, true);
}

std::optional<std::string> DialogueControl::take_injection(std::chrono::milliseconds window) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, window, [&] { return injected_.has_value(); });
  auto out = std::move(injected_);
  injected_.reset();
  return out;
}

Dialogue::Dialogue(std::string agent_id, std::shared_ptr<ChatClient> client,
                   std::shared_ptr<Transcript> transcript,
                   std::shared_ptr<DialogueControl> control, PromptTemplateSet templates,
                   std::chrono::milliseconds operator_window)
    : agent_id_(std::move(agent_id)),
      client_(std::move(client)),
      transcript_(std::move(transcript)),
      control_(std::move(control)),
      templates_(std::move(templates)),
      window_(operator_window) {}

ChatMessage Dialogue::send(ChatMessage message, int round) {
  history_.push_back(std::move(message));
  ChatMessage reply = client_->chat(history_, {agent_id_, round, transcript_.get()});
  history_.push_back(reply);
  return reply;
}

RectificationState rectify(Dialogue& dialogue, RectificationState state, int round) {
  if (state.outcome != RectificationState::Outcome::Pending ||
      state.attempts_used >= kMaxRectificationAttempts) {
    throw ProtocolError("rectify() needs a pending state with attempts left");
  }
  DialogueControl* control = dialogue.control();
  while (true) {
    ++state.attempts_used;
    if (state.attempts_used >= kMaxRectificationAttempts) {
      state.outcome = RectificationState::Outcome::Failed;
      if (control) control->mark_failed();
      return state;
    }
    ChatMessage clarification{Role::Experimenter, dialogue.templates().clarification, "engine"};
    if (control) {
      control->flag(state.attempts_used);
      if (auto text = control->take_injection(dialogue.operator_window())) {
        clarification = {Role::Experimenter, std::move(*text), "operator"};
      }
    }
    const ChatMessage reply = dialogue.send(std::move(clarification), round);
    if (auto action = parse_action(reply.content)) {
      state.outcome = RectificationState::Outcome::Resolved;
      state.action = action;
      if (control) control->clear();
      return state;
    }
  }
}

RectificationState request_action(Dialogue& dialogue, const std::string& prompt, int round) {
  RectificationState state;
  const ChatMessage reply = dialogue.send({Role::Experimenter, prompt, "engine"}, round);
  if (auto action = parse_action(reply.content)) {
    state.outcome = RectificationState::Outcome::Resolved;
    state.action = action;
    return state;
  }
  return rectify(dialogue, state, round);
}

}  // namespace netpd::llm
