#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace spectrai::train {

enum class EventKind { Step, EpochEnd, Checkpoint, Finished, Stopped, Error };

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);
inline bool is_terminal(EventKind k) {
  return k == EventKind::Finished || k == EventKind::Stopped || k == EventKind::Error;
}

struct TrainingEvent {
  EventKind kind = EventKind::Step;
  double timestamp = 0.0;  // seconds since the Unix epoch
  int epoch = 0;           // 1-based; 0 before the first epoch
  long step = 0;           // optimizer steps taken so far
  std::string split = "train";
  std::optional<double> loss;
  double lr = 0.0;
  std::map<std::string, double> metrics;
  std::string message;
};

nlohmann::json to_json(const TrainingEvent& e);
TrainingEvent event_from_json(const nlohmann::json& j);
double now_seconds();

/// Append-only event log with many concurrent readers. Optionally mirrors
/// every event as one JSON line into a file.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(std::filesystem::path mirror) { set_mirror(std::move(mirror)); }

  void set_mirror(std::filesystem::path path, bool truncate = true);
  void set_listener(std::function<void(const TrainingEvent&)> listener);

  /// Returns the event's cursor (its index).
  std::size_t append(TrainingEvent e);
  std::vector<TrainingEvent> since(std::size_t cursor) const;
  std::size_t size() const;
  bool terminated() const;

  /// Blocks until more than `cursor` events exist, the log terminates, or the
  /// timeout passes. Returns the new size.
  std::size_t wait(std::size_t cursor, std::chrono::milliseconds timeout) const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<TrainingEvent> events_;
  std::ofstream mirror_;
  std::function<void(const TrainingEvent&)> listener_;
  bool terminated_ = false;
};

std::vector<TrainingEvent> read_history(const std::filesystem::path& path);

}  // namespace spectrai::train
