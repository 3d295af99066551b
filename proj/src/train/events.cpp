#include "spectrai/train/events.hpp"

#include "spectrai/core/error.hpp"
#include "spectrai/io/envi.hpp"

namespace spectrai::train {

using nlohmann::json;

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Step: return "step";
    case EventKind::EpochEnd: return "epoch_end";
    case EventKind::Checkpoint: return "checkpoint";
    case EventKind::Finished: return "finished";
    case EventKind::Stopped: return "stopped";
    case EventKind::Error: return "error";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view text) {
  for (EventKind k : {EventKind::Step, EventKind::EpochEnd, EventKind::Checkpoint, EventKind::Finished,
                      EventKind::Stopped, EventKind::Error})
    if (to_string(k) == text) return k;
  throw ParseError("unknown event kind: " + std::string(text));
}

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

json to_json(const TrainingEvent& e) {
  json j;
  j["kind"] = std::string(to_string(e.kind));
  j["timestamp"] = e.timestamp;
  j["epoch"] = e.epoch;
  j["step"] = e.step;
  j["split"] = e.split;
  j["loss"] = e.loss ? json(*e.loss) : json(nullptr);
  j["lr"] = e.lr;
  j["metrics"] = e.metrics;
  if (!e.message.empty()) j["message"] = e.message;
  return j;
}

TrainingEvent event_from_json(const json& j) {
  TrainingEvent e;
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.timestamp = j.value("timestamp", 0.0);
  e.epoch = j.value("epoch", 0);
  e.step = j.value("step", 0L);
  e.split = j.value("split", std::string("train"));
  if (j.contains("loss") && !j.at("loss").is_null()) e.loss = j.at("loss").get<double>();
  e.lr = j.value("lr", 0.0);
  if (j.contains("metrics")) e.metrics = j.at("metrics").get<std::map<std::string, double>>();
  e.message = j.value("message", std::string());
  return e;
}

void EventLog::set_mirror(std::filesystem::path path, bool truncate) {
  std::lock_guard lock(mu_);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  mirror_.close();
  mirror_.open(path, truncate ? std::ios::trunc : std::ios::app);
  if (!mirror_) throw IoError("cannot open " + path.string());
}

void EventLog::set_listener(std::function<void(const TrainingEvent&)> listener) {
  std::lock_guard lock(mu_);
  listener_ = std::move(listener);
}

std::size_t EventLog::append(TrainingEvent e) {
  std::size_t cursor;
  std::function<void(const TrainingEvent&)> listener;
  {
    std::lock_guard lock(mu_);
    if (terminated_) throw Error("event log already terminated");
    if (!events_.empty() && (e.epoch < events_.back().epoch || e.step < events_.back().step))
      throw Error("events must be monotone in (epoch, step)");
    if (mirror_.is_open()) mirror_ << to_json(e).dump() << "\n" << std::flush;
    terminated_ = is_terminal(e.kind);
    events_.push_back(e);
    cursor = events_.size() - 1;
    listener = listener_;
  }
  cv_.notify_all();
  if (listener) listener(e);
  return cursor;
}

std::vector<TrainingEvent> EventLog::since(std::size_t cursor) const {
  std::lock_guard lock(mu_);
  if (cursor >= events_.size()) return {};
  return {events_.begin() + static_cast<long>(cursor), events_.end()};
}

std::size_t EventLog::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

bool EventLog::terminated() const {
  std::lock_guard lock(mu_);
  return terminated_;
}

std::size_t EventLog::wait(std::size_t cursor, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return events_.size() > cursor || terminated_; });
  return events_.size();
}

std::vector<TrainingEvent> read_history(const std::filesystem::path& path) {
  std::vector<TrainingEvent> out;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(event_from_json(json::parse(line)));
  return out;
}

}  // namespace spectrai::train
