#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "netpd/agents.hpp"
#include "netpd/llm/rectify.hpp"

namespace netpd::llm {

// Agent backed by a chat provider. Round 1 runs the tutorial and then the
// first action request; every later round sends the previous round's
// feedback, which ends with the request for the next choice. Feedback after
// the final round is rendered but never sent.
class ChatAgent final : public Agent {
 public:
  ChatAgent(std::shared_ptr<ChatClient> client, std::shared_ptr<Transcript> transcript,
            std::shared_ptr<DialogueControl> control,
            PromptTemplateSet templates = PromptTemplateSet::defaults(),
            std::chrono::milliseconds operator_window = std::chrono::milliseconds(0));

  AgentKind kind() const noexcept override { return AgentKind::Chat; }
  const Dialogue& dialogue() const { return *dialogue_; }
  const RectificationState& last_rectification() const noexcept { return last_; }
  const std::optional<std::string>& pending_feedback() const noexcept { return pending_; }

 protected:
  void on_start() override;
  Action do_decide(int round_index) override;
  void do_observe(const Observation& obs) override;

 private:
  std::shared_ptr<ChatClient> client_;
  std::shared_ptr<Transcript> transcript_;
  std::shared_ptr<DialogueControl> control_;
  PromptTemplateSet templates_;
  std::chrono::milliseconds window_;
  std::unique_ptr<Dialogue> dialogue_;
  std::optional<std::string> pending_;
  RectificationState last_;
};

}  // namespace netpd::llm
