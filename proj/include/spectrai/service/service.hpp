#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "spectrai/train/config.hpp"
#include "spectrai/train/events.hpp"
#include "spectrai/train/inference.hpp"

namespace httplib {
class Server;
}

namespace spectrai::service {

enum class State { Created, Running, Stopped, Finished, Error };

std::string_view to_string(State s);
State parse_state(std::string_view text);
bool is_terminal(State s);

/// Per task: permitted networks, losses, augmentations and normalization
/// modes, plus the default hyperparameters and network. Built only from the
/// gating functions and task defaults.
nlohmann::json tasks_payload();

/// Summary of a manifest: record count, pair kinds, split counts, the tasks
/// it can feed and its class names.
nlohmann::json dataset_summary(const std::filesystem::path& manifest_path);

struct ExperimentRecord {
  std::string id;
  State state = State::Created;
  train::ExperimentConfig config;
  double created = 0.0;
  double updated = 0.0;
  std::string message;
};

struct ServiceOptions {
  /// Records live in <root>/experiments/<id>/, runs in <id>/run/.
  std::filesystem::path root = "runs/service";
};

/// HTTP status plus body, independent of the transport.
struct Reply {
  int status = 200;
  nlohmann::json body;
};

/// Experiment service. One run at a time; state changes go through a single
/// mutex, event logs are shared with concurrent stream readers.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Registers every /api route on `server`.
  void mount(httplib::Server& server);

  Reply list_datasets() const;
  Reply register_dataset(const nlohmann::json& body);
  Reply create_experiment(const nlohmann::json& body);
  Reply list_experiments() const;
  Reply get_experiment(const std::string& id) const;
  Reply start(const std::string& id);
  Reply stop(const std::string& id);
  Reply checkpoints(const std::string& id) const;

  /// Event log of an experiment, or null for an unknown id.
  std::shared_ptr<train::EventLog> events(const std::string& id) const;

  /// Blocks until the experiment leaves the running state.
  void wait(const std::string& id) const;

  /// Resolves "<experiment>/<latest|best>" to a checkpoint directory.
  std::optional<std::filesystem::path> checkpoint_dir(const std::string& checkpoint_id) const;

  /// Loads (and caches) the model for a checkpoint id. Runs `f` with the
  /// model under the inference lock.
  template <typename F>
  auto with_model(const std::string& checkpoint_id, F&& f);

  const std::filesystem::path& root() const { return options_.root; }

 private:
  struct Slot {
    ExperimentRecord record;
    std::shared_ptr<train::EventLog> log;
    std::shared_ptr<std::atomic<bool>> stop;
  };

  void recover();
  void persist(const Slot& slot) const;
  nlohmann::json record_json(const Slot& slot) const;
  std::filesystem::path experiment_dir(const std::string& id) const;
  void run(std::string id);
  train::Model& model(const std::string& checkpoint_id);

  ServiceOptions options_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::map<std::string, Slot> slots_;
  std::map<std::string, nlohmann::json> datasets_;
  std::optional<std::string> running_;
  long next_id_ = 1;
  std::thread worker_;

  std::mutex infer_mu_;
  struct CachedModel {
    std::unique_ptr<train::Model> model;
    std::filesystem::file_time_type stamp;
  };
  std::map<std::string, CachedModel> models_;

 public:
  /// Set on destruction so open event streams close.
  std::atomic<bool> shutting_down{false};
};

template <typename F>
auto Service::with_model(const std::string& checkpoint_id, F&& f) {
  std::lock_guard lock(infer_mu_);
  return f(model(checkpoint_id));
}

/// Binds and serves until `stop` is raised. Returns the bound port through
/// `on_listen` before blocking. Port 0 picks a free port.
void serve(Service& service, const std::string& host, int port, const std::atomic<bool>& stop,
           const std::function<void(int)>& on_listen = {});

}  // namespace spectrai::service
