#include "netpd/llm/chat_agent.hpp"

#include "netpd/errors.hpp"

namespace netpd::llm {

ChatAgent::ChatAgent(std::shared_ptr<ChatClient> client, std::shared_ptr<Transcript> transcript,
                     std::shared_ptr<DialogueControl> control, PromptTemplateSet templates,
                     std::chrono::milliseconds operator_window)
    : client_(std::move(client)),
      transcript_(std::move(transcript)),
      control_(std::move(control)),
      templates_(std::move(templates)),
      window_(operator_window) {}

void ChatAgent::on_start() {
  dialogue_ = std::make_unique<Dialogue>(context().agent_id, client_, transcript_, control_,
                                         templates_, window_);
  pending_.reset();
  last_ = {};
  if (control_) control_->clear();
}

Action ChatAgent::do_decide(int round_index) {
  std::string prompt;
  if (round_index == 1) {
    for (auto& text : render_opening(templates_, context().params, context().announced_rounds)) {
      dialogue_->send({Role::Experimenter, std::move(text), "engine"}, 0);
    }
    prompt = templates_.action_request;
  } else {
    if (!pending_) throw ProtocolError("no feedback queued for round " + std::to_string(round_index));
    prompt = std::move(*pending_);
    pending_.reset();
  }
  last_ = request_action(*dialogue_, prompt, round_index);
  if (last_.failed()) throw RectificationFailure(round_index);
  return *last_.action;
}

void ChatAgent::do_observe(const Observation& obs) {
  pending_ = render_feedback(obs, context().params, templates_).content;
}

}  // namespace netpd::llm
