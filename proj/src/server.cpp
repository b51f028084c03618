#include "netpd/server.hpp"

#include <sys/socket.h>

#include <httplib.h>

#include "netpd/errors.hpp"

namespace netpd {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message,
                const std::string& field = {}) {
  nlohmann::json body{{"error", message}};
  if (!field.empty()) body["field"] = field;
  send_json(res, status, body);
}

std::optional<nlohmann::json> body_json(const httplib::Request& req, httplib::Response& res) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    send_error(res, 400, std::string("malformed JSON: ") + e.what());
    return std::nullopt;
  }
}

nlohmann::json summary(const ExperimentRun& run) {
  return {{"id", run.id()}, {"name", run.config().name}, {"state", to_string(run.state())}};
}

bool known_agent(const ExperimentConfig& config, const std::string& id, AgentKind kind) {
  for (std::size_t i = 0; i < config.agents.size(); ++i) {
    if (agent_id(config, i) == id) return config.agents[i].kind == kind;
  }
  return false;
}

}  // namespace

ControlServer::ControlServer(RunOptions base) : base_(std::move(base)) {}

ControlServer::~ControlServer() {
  stop();
  std::lock_guard lock(mu_);
  for (auto& [id, run] : runs_) run->abort();
}

std::string ControlServer::create(ExperimentConfig config) {
  std::string id;
  {
    std::lock_guard lock(mu_);
    id = "exp-" + std::to_string(next_id_++);
  }
  auto options = base_;
  options.control = nullptr;
  options.events = nullptr;
  auto run = std::make_shared<ExperimentRun>(id, std::move(config), options);
  std::lock_guard lock(mu_);
  runs_[id] = std::move(run);
  return id;
}

std::shared_ptr<ExperimentRun> ControlServer::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = runs_.find(id);
  return it == runs_.end() ? nullptr : it->second;
}

void ControlServer::routes() {
  auto& s = *http_;

  s.Post("/experiments", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = body_json(req, res);
    if (!body) return;
    try {
      auto id = create(parse_config(*body));
      send_json(res, 201, {{"id", id}});
    } catch (const ConfigError& e) {
      send_error(res, 400, e.what(), e.field());
    }
  });

  s.Get("/experiments", [this](const httplib::Request&, httplib::Response& res) {
    auto list = nlohmann::json::array();
    std::lock_guard lock(mu_);
    for (const auto& [id, run] : runs_) list.push_back(summary(*run));
    send_json(res, 200, list);
  });

  s.Get(R"(/experiments/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto run = find(req.matches[1]);
    if (!run) return send_error(res, 404, "no such experiment");
    auto body = summary(*run);
    body["config"] = to_json(run->config());
    body["events"] = run->events().size();
    auto awaiting = nlohmann::json::array();
    auto flagged = nlohmann::json::array();
    for (std::size_t i = 0; i < run->config().agents.size(); ++i) {
      const auto id = agent_id(run->config(), i);
      if (auto inbox = run->control().find_inbox(id); inbox && inbox->awaiting()) awaiting.push_back(id);
      if (auto d = run->control().find_dialogue(id); d && d->flagged()) {
        flagged.push_back({{"agent", id}, {"attempts", d->attempts_used()}});
      }
    }
    body["awaiting"] = std::move(awaiting);
    body["flagged"] = std::move(flagged);
    if (auto result = run->result()) {
      auto reps = nlohmann::json::array();
      for (const auto& rep : result->repetitions) {
        auto j = to_json(rep.status);
        j["index"] = rep.index;
        j["seed"] = rep.seed;
        j["rounds"] = rep.records.size();
        reps.push_back(std::move(j));
      }
      body["repetitions"] = std::move(reps);
    }
    send_json(res, 200, body);
  });

  s.Get(R"(/experiments/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    auto run = find(req.matches[1]);
    if (!run) return send_error(res, 404, "no such experiment");
    std::uint64_t after = 0;
    try {
      if (req.has_param("after")) {
        after = std::stoull(req.get_param_value("after"));
      } else if (req.has_header("Last-Event-ID")) {
        after = std::stoull(req.get_header_value("Last-Event-ID"));
      }
    } catch (const std::exception&) {
      return send_error(res, 400, "bad event cursor");
    }
    auto cursor = std::make_shared<std::uint64_t>(after);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [run, cursor](std::size_t, httplib::DataSink& sink) {
          auto& log = run->events();
          while (!log.wait(*cursor, std::chrono::milliseconds(250))) {
            if (log.closed()) {
              sink.done();
              return true;
            }
            if (!sink.is_writable()) return false;
          }
          for (const auto& e : log.since(*cursor)) {
            std::string frame = "id: " + std::to_string(e.seq) + "\nevent: " + e.type +
                                "\ndata: " + to_json(e).dump() + "\n\n";
            if (!sink.write(frame.data(), frame.size())) return false;
            *cursor = e.seq;
          }
          return true;
        });
  });

  s.Post(R"(/experiments/([^/]+)/agents/([^/]+)/action)",
         [this](const httplib::Request& req, httplib::Response& res) {
           auto run = find(req.matches[1]);
           if (!run) return send_error(res, 404, "no such experiment");
           const std::string aid = req.matches[2];
           if (!known_agent(run->config(), aid, AgentKind::Human)) {
             return send_error(res, 404, "no human agent '" + aid + "'");
           }
           auto body = body_json(req, res);
           if (!body) return;
           std::optional<Action> action;
           if (body->is_object() && body->contains("action") && body->at("action").is_string()) {
             action = action_from_string(body->at("action").get<std::string>());
           }
           if (!action) return send_error(res, 400, "expected {\"action\": \"C\" or \"D\"}", "action");
           switch (run->control().inbox(aid)->submit(*action)) {
             case HumanInbox::SubmitResult::Accepted:
               return send_json(res, 200, {{"accepted", true}});
             case HumanInbox::SubmitResult::NotAwaiting:
               return send_error(res, 409, "agent is not awaiting input");
             case HumanInbox::SubmitResult::Expired:
               return send_error(res, 410, "the input window has closed");
           }
         });

  s.Post(R"(/experiments/([^/]+)/dialogues/([^/]+)/inject)",
         [this](const httplib::Request& req, httplib::Response& res) {
           auto run = find(req.matches[1]);
           if (!run) return send_error(res, 404, "no such experiment");
           const std::string aid = req.matches[2];
           if (!known_agent(run->config(), aid, AgentKind::Chat)) {
             return send_error(res, 404, "no chat agent '" + aid + "'");
           }
           auto body = body_json(req, res);
           if (!body) return;
           if (!body->is_object() || !body->contains("content") || !body->at("content").is_string() ||
               body->at("content").get<std::string>().empty()) {
             return send_error(res, 400, "expected {\"content\": non-empty text}", "content");
           }
           switch (run->control().dialogue(aid)->inject(body->at("content").get<std::string>())) {
             case llm::DialogueControl::InjectResult::Accepted:
               return send_json(res, 200, {{"accepted", true}});
             case llm::DialogueControl::InjectResult::NotFlagged:
               return send_error(res, 409, "dialogue is not flagged");
             case llm::DialogueControl::InjectResult::Gone:
               return send_error(res, 410, "rectification attempts are exhausted");
           }
         });

  s.Post(R"(/experiments/([^/]+)/abort)", [this](const httplib::Request& req, httplib::Response& res) {
    auto run = find(req.matches[1]);
    if (!run) return send_error(res, 404, "no such experiment");
    if (run->state() != ExperimentRun::State::Running) {
      return send_error(res, 409, "experiment already finished");
    }
    run->abort();
    send_json(res, 200, {{"aborting", true}});
  });
}

int ControlServer::start(const std::string& host, int port) {
  http_ = std::make_unique<httplib::Server>();
  // Plain SO_REUSEADDR: a port held by another process must fail to bind.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  routes();
  int bound = port;
  if (port == 0) {
    bound = http_->bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
  } else if (!http_->bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port) + " (address in use?)");
  }
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return bound;
}

void ControlServer::wait() {
  if (thread_.joinable()) thread_.join();
}

void ControlServer::stop() {
  if (http_) http_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace netpd
