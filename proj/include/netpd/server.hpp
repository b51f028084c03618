#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "netpd/runner.hpp"

namespace httplib { class Server; }

namespace netpd {

// HTTP control surface:
//   POST /experiments                               config JSON -> 201 {"id"}
//   GET  /experiments                               [{"id", "name", "state"}]
//   GET  /experiments/{id}                          state, progress, statuses
//   GET  /experiments/{id}/events                   server-sent events; resume
//                                                   with ?after=N or Last-Event-ID
//   POST /experiments/{id}/agents/{aid}/action      {"action": "C"|"D"}
//   POST /experiments/{id}/dialogues/{aid}/inject   {"content": text}
//   POST /experiments/{id}/abort
class ControlServer {
 public:
  explicit ControlServer(RunOptions base = {});
  ~ControlServer();
  ControlServer(const ControlServer&) = delete;
  ControlServer& operator=(const ControlServer&) = delete;

  // Binds and starts serving on a background thread; port 0 picks a free
  // port. Returns the bound port. Throws Error if the address is taken.
  int start(const std::string& host, int port);
  // Blocks until stop().
  void wait();
  void stop();

  std::string create(ExperimentConfig config);
  std::shared_ptr<ExperimentRun> find(const std::string& id) const;

 private:
  void routes();

  RunOptions base_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<ExperimentRun>> runs_;
  std::uint64_t next_id_ = 1;
};

}  // namespace netpd
