#include "spectrai/service/service.hpp"

#include <charconv>
#include <set>

#include <httplib.h>

#include "spectrai/io/envi.hpp"
#include "spectrai/io/tables.hpp"
#include "spectrai/nn/archive.hpp"
#include "spectrai/pipeline/augment.hpp"
#include "spectrai/service/infer.hpp"
#include "spectrai/train/data.hpp"
#include "spectrai/train/trainer.hpp"

namespace spectrai::service {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(State s) {
  switch (s) {
    case State::Created: return "created";
    case State::Running: return "running";
    case State::Stopped: return "stopped";
    case State::Finished: return "finished";
    case State::Error: return "error";
  }
  return "unknown";
}

State parse_state(std::string_view text) {
  for (auto s : {State::Created, State::Running, State::Stopped, State::Finished, State::Error})
    if (to_string(s) == text) return s;
  throw ParseError("unknown experiment state '" + std::string(text) + "'");
}

bool is_terminal(State s) { return s == State::Stopped || s == State::Finished || s == State::Error; }

json tasks_payload() {
  json tasks = json::array();
  for (TaskKind task : kAllTasks) {
    json networks = json::array(), losses = json::array(), augs = json::array();
    for (auto f : permitted_families(task)) networks.push_back(std::string(to_string(f)));
    for (auto l : permitted_losses(task)) losses.push_back(std::string(to_string(l)));
    for (auto a : permitted_augmentations(task)) augs.push_back(std::string(to_string(a)));
    const auto defaults = train::default_experiment_config(task);
    tasks.push_back({{"kind", std::string(to_string(task))},
                     {"image", is_image_task(task)},
                     {"pair_kind", std::string(to_string(pair_kind_for(task)))},
                     {"networks", networks},
                     {"losses", losses},
                     {"augmentations", augs},
                     {"normalize", train::permitted_normalize(task)},
                     {"defaults", {{"hyper", train::to_json(train::default_hyperparameters(task))},
                                   {"network", nn::to_json(defaults.network)}}}});
  }
  json all_networks = json::array(), all_losses = json::array(), all_augs = json::array();
  for (auto f : kAllFamilies) all_networks.push_back(std::string(to_string(f)));
  for (auto l : kAllLosses) all_losses.push_back(std::string(to_string(l)));
  for (auto a : kAllAugmentations) all_augs.push_back(std::string(to_string(a)));
  return {{"tasks", tasks},
          {"networks", all_networks},
          {"losses", all_losses},
          {"augmentations", all_augs},
          {"normalize", train::permitted_normalize(TaskKind::Segmentation)}};
}

json dataset_summary(const fs::path& manifest_path) {
  const io::DatasetManifest m = io::read_manifest(manifest_path);
  std::set<PairKind> kinds;
  std::map<std::string, int> splits{{"train", 0}, {"val", 0}, {"test", 0}, {"unassigned", 0}};
  std::vector<std::string> labels;
  std::vector<std::string> classes;
  for (const auto& r : m.records) {
    kinds.insert(r.pair_kind);
    ++splits[std::string(io::to_string(r.split))];
    if (r.label) labels.push_back(*r.label);
    if (classes.empty() && r.pair_kind == PairKind::CubeToMask && r.target_path) {
      const auto table = json::parse(io::read_text_file(io::class_table_path_for(m.resolve(*r.target_path))));
      classes = table.at("classes").get<std::vector<std::string>>();
    }
  }
  if (classes.empty() && !labels.empty()) {
    std::set<std::string> unique(labels.begin(), labels.end());
    classes.assign(unique.begin(), unique.end());
  }
  json kind_list = json::array(), task_list = json::array();
  for (auto k : kinds) kind_list.push_back(std::string(to_string(k)));
  for (auto t : kAllTasks)
    if (kinds.count(pair_kind_for(t))) task_list.push_back(std::string(to_string(t)));
  return {{"manifest", fs::absolute(manifest_path).lexically_normal().string()},
          {"records", m.records.size()},
          {"pair_kinds", kind_list},
          {"tasks", task_list},
          {"splits", splits},
          {"class_names", classes}};
}

namespace {

json error_body(const std::string& message) { return {{"error", message}}; }

void write_json_atomic(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  io::write_text_file(tmp, j.dump(2) + "\n");
  fs::rename(tmp, path);
}

void append_error(train::EventLog& log, const std::string& message) {
  if (log.terminated()) return;
  const auto all = log.since(0);
  train::TrainingEvent e;
  e.kind = train::EventKind::Error;
  e.timestamp = train::now_seconds();
  e.message = message;
  if (!all.empty()) {
    e.epoch = all.back().epoch;
    e.step = all.back().step;
    e.lr = all.back().lr;
  }
  log.append(std::move(e));
}

}  // namespace

Service::Service(ServiceOptions options) : options_(std::move(options)) {
  fs::create_directories(options_.root / "experiments");
  recover();
}

Service::~Service() {
  shutting_down = true;
  {
    std::lock_guard lock(mu_);
    for (auto& [_, slot] : slots_) slot.stop->store(true);
  }
  if (worker_.joinable()) worker_.join();
}

fs::path Service::experiment_dir(const std::string& id) const { return options_.root / "experiments" / id; }

void Service::recover() {
  if (const fs::path reg = options_.root / "datasets.json"; fs::exists(reg)) {
    for (auto& [id, summary] : json::parse(io::read_text_file(reg)).items()) datasets_[id] = summary;
  }
  for (const auto& entry : fs::directory_iterator(options_.root / "experiments")) {
    const fs::path file = entry.path() / "record.json";
    if (!fs::exists(file)) continue;
    const json j = json::parse(io::read_text_file(file));
    Slot slot;
    slot.record.id = j.at("id").get<std::string>();
    slot.record.state = parse_state(j.at("state").get<std::string>());
    slot.record.config = train::experiment_config_from_json(j.at("config"));
    slot.record.created = j.at("created").get<double>();
    slot.record.updated = j.at("updated").get<double>();
    slot.record.message = j.value("message", "");
    slot.log = std::make_shared<train::EventLog>();
    slot.stop = std::make_shared<std::atomic<bool>>(false);
    const fs::path history = fs::path(slot.record.config.data.output_dir) / "history.jsonl";
    if (fs::exists(history)) {
      for (auto& e : train::read_history(history)) slot.log->append(std::move(e));
    }
    if (slot.record.state == State::Running) {
      slot.record.state = State::Error;
      slot.record.message = "service restarted during the run";
      slot.record.updated = train::now_seconds();
      slot.log->set_mirror(history, false);
      append_error(*slot.log, slot.record.message);
      persist(slot);
    }
    long n = 0;
    const auto& id = slot.record.id;
    if (id.rfind("exp-", 0) == 0) std::from_chars(id.data() + 4, id.data() + id.size(), n);
    next_id_ = std::max(next_id_, n + 1);
    slots_.emplace(id, std::move(slot));
  }
}

void Service::persist(const Slot& slot) const {
  fs::create_directories(experiment_dir(slot.record.id));
  json j = record_json(slot);
  j.erase("checkpoints");
  write_json_atomic(experiment_dir(slot.record.id) / "record.json", j);
}

json Service::record_json(const Slot& slot) const {
  const auto& r = slot.record;
  json cps = json::array();
  for (const char* which : {"latest", "best"}) {
    const fs::path dir = fs::path(r.config.data.output_dir) / which;
    if (!fs::exists(dir / "meta.json")) continue;
    try {
      const auto meta = train::read_checkpoint_meta(dir);
      cps.push_back({{"id", r.id + "/" + which},
                     {"epoch", meta.epoch},
                     {"step", meta.step},
                     {"partial", meta.partial},
                     {"val_loss", meta.val_loss ? json(*meta.val_loss) : json(nullptr)}});
    } catch (const std::exception&) {
      // being replaced by the running experiment
    }
  }
  return {{"id", r.id},
          {"name", r.config.name},
          {"state", std::string(to_string(r.state))},
          {"config", train::to_json(r.config)},
          {"created", r.created},
          {"updated", r.updated},
          {"cursor", slot.log->size()},
          {"message", r.message},
          {"checkpoints", cps}};
}

Reply Service::list_datasets() const {
  std::lock_guard lock(mu_);
  json list = json::array();
  for (const auto& [_, d] : datasets_) list.push_back(d);
  return {200, list};
}

Reply Service::register_dataset(const json& body) {
  if (!body.is_object() || !body.contains("manifest") || !body.at("manifest").is_string())
    return {400, error_body("body needs a manifest path")};
  const fs::path path = train::resolve_data_path(body.at("manifest").get<std::string>());
  if (!fs::exists(path)) return {404, error_body("manifest not found: " + path.string())};
  json summary;
  try {
    summary = dataset_summary(path);
  } catch (const std::exception& e) {
    return {400, error_body(e.what())};
  }
  std::lock_guard lock(mu_);
  const std::string id = "ds-" + std::to_string(datasets_.size() + 1);
  summary["id"] = id;
  summary["name"] = body.value("name", path.stem().string());
  datasets_[id] = summary;
  json all = json::object();
  for (const auto& [k, v] : datasets_) all[k] = v;
  write_json_atomic(options_.root / "datasets.json", all);
  return {201, summary};
}

Reply Service::create_experiment(const json& body) {
  train::ExperimentConfig config;
  try {
    config = train::experiment_config_from_json(body.contains("config") ? body.at("config") : body);
  } catch (const std::exception& e) {
    return {400, {{"error", "invalid config"}, {"violations", json::array({e.what()})}}};
  }
  const auto v = config.violations();
  if (!v.empty()) return {400, {{"error", "invalid config"}, {"violations", v}}};
  std::lock_guard lock(mu_);
  char buf[16];
  std::snprintf(buf, sizeof buf, "exp-%04ld", next_id_++);
  Slot slot;
  slot.record.id = buf;
  slot.record.config = config;
  slot.record.config.data.output_dir = (experiment_dir(slot.record.id) / "run").string();
  slot.record.created = slot.record.updated = train::now_seconds();
  slot.log = std::make_shared<train::EventLog>();
  slot.stop = std::make_shared<std::atomic<bool>>(false);
  persist(slot);
  auto [it, _] = slots_.emplace(slot.record.id, std::move(slot));
  return {201, record_json(it->second)};
}

Reply Service::list_experiments() const {
  std::lock_guard lock(mu_);
  json list = json::array();
  for (const auto& [_, s] : slots_) list.push_back(record_json(s));
  return {200, list};
}

Reply Service::get_experiment(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = slots_.find(id);
  if (it == slots_.end()) return {404, error_body("unknown experiment " + id)};
  return {200, record_json(it->second)};
}

Reply Service::checkpoints(const std::string& id) const {
  auto r = get_experiment(id);
  if (r.status != 200) return r;
  return {200, r.body.at("checkpoints")};
}

Reply Service::start(const std::string& id) {
  std::unique_lock lock(mu_);
  const auto it = slots_.find(id);
  if (it == slots_.end()) return {404, error_body("unknown experiment " + id)};
  Slot& slot = it->second;
  if (slot.record.state != State::Created)
    return {409, {{"error", "experiment is " + std::string(to_string(slot.record.state))},
                  {"state", std::string(to_string(slot.record.state))}}};
  if (running_) return {409, {{"error", "experiment " + *running_ + " is running"}, {"running", *running_}}};
  running_ = id;
  slot.record.state = State::Running;
  slot.record.updated = train::now_seconds();
  persist(slot);
  // The previous worker has already released the slot; joining it is quick.
  std::thread previous = std::move(worker_);
  worker_ = std::thread([this, id] { run(id); });
  json reply = record_json(slot);
  lock.unlock();
  if (previous.joinable()) previous.join();
  return {200, reply};
}

Reply Service::stop(const std::string& id) {
  std::lock_guard lock(mu_);
  const auto it = slots_.find(id);
  if (it == slots_.end()) return {404, error_body("unknown experiment " + id)};
  Slot& slot = it->second;
  if (slot.record.state != State::Running)
    return {409, {{"error", "experiment is " + std::string(to_string(slot.record.state)) + ", not running"},
                  {"state", std::string(to_string(slot.record.state))}}};
  slot.stop->store(true);
  return {202, record_json(slot)};
}

std::shared_ptr<train::EventLog> Service::events(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = slots_.find(id);
  return it == slots_.end() ? nullptr : it->second.log;
}

void Service::wait(const std::string& id) const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] {
    const auto it = slots_.find(id);
    return it == slots_.end() || it->second.record.state != State::Running;
  });
}

void Service::run(std::string id) {
  train::ExperimentConfig config;
  std::shared_ptr<train::EventLog> log;
  std::shared_ptr<std::atomic<bool>> stop;
  {
    std::lock_guard lock(mu_);
    const Slot& slot = slots_.at(id);
    config = slot.record.config;
    log = slot.log;
    stop = slot.stop;
  }
  State final = State::Error;
  std::string message;
  try {
    const auto manifest = io::read_manifest(train::resolve_data_path(config.data.manifest));
    auto data = train::partition(train::load_dataset(manifest, config.task), config.split);
    train::TrainOptions opts;
    opts.stop = stop.get();
    const auto result = train::run_training(config, data, *log, opts);
    final = result.outcome == train::Outcome::Finished  ? State::Finished
            : result.outcome == train::Outcome::Stopped ? State::Stopped
                                                        : State::Error;
    message = result.message;
  } catch (const std::exception& e) {
    message = e.what();
  }
  try {
    if (!log->terminated()) {
      log->set_mirror(fs::path(config.data.output_dir) / "history.jsonl", false);
      append_error(*log, message);
    }
  } catch (const std::exception&) {
  }
  std::lock_guard lock(mu_);
  Slot& slot = slots_.at(id);
  slot.record.state = final;
  slot.record.message = message;
  slot.record.updated = train::now_seconds();
  running_.reset();
  try {
    persist(slot);
  } catch (const std::exception&) {
  }
  cv_.notify_all();
}

std::optional<fs::path> Service::checkpoint_dir(const std::string& checkpoint_id) const {
  const auto slash = checkpoint_id.find('/');
  if (slash == std::string::npos) return std::nullopt;
  const std::string exp = checkpoint_id.substr(0, slash), which = checkpoint_id.substr(slash + 1);
  if (which != "latest" && which != "best") return std::nullopt;
  std::lock_guard lock(mu_);
  const auto it = slots_.find(exp);
  if (it == slots_.end()) return std::nullopt;
  const fs::path dir = fs::path(it->second.record.config.data.output_dir) / which;
  if (!fs::exists(dir / "meta.json")) return std::nullopt;
  return dir;
}

train::Model& Service::model(const std::string& checkpoint_id) {
  const auto dir = checkpoint_dir(checkpoint_id);
  if (!dir) throw UnknownCheckpoint("unknown checkpoint " + checkpoint_id);
  const auto stamp = fs::last_write_time(*dir / "meta.json");
  auto it = models_.find(checkpoint_id);
  if (it == models_.end() || it->second.stamp != stamp) {
    CachedModel c{std::make_unique<train::Model>(train::load_model(*dir)), stamp};
    it = models_.insert_or_assign(checkpoint_id, std::move(c)).first;
  }
  return *it->second.model;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

void send(httplib::Response& res, const Reply& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

bool parse_body(const httplib::Request& req, httplib::Response& res, json& out) {
  try {
    out = req.body.empty() ? json::object() : json::parse(req.body);
    return true;
  } catch (const json::exception& e) {
    send(res, {400, error_body(std::string("malformed JSON: ") + e.what())});
    return false;
  }
}

std::optional<std::size_t> parse_cursor(const std::string& text) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) return std::nullopt;
  return v;
}

}  // namespace

void Service::mount(httplib::Server& svr) {
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type, X-Checkpoint, X-Shape, Last-Event-ID"},
                           {"Access-Control-Expose-Headers", "X-Shape, X-Classes, X-Task"}});
  svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, {500, error_body(what)});
  });

  svr.Get("/api/tasks", [](const httplib::Request&, httplib::Response& res) { send(res, {200, tasks_payload()}); });
  svr.Get("/api/datasets", [this](const httplib::Request&, httplib::Response& res) { send(res, list_datasets()); });
  svr.Post("/api/datasets", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (parse_body(req, res, body)) send(res, register_dataset(body));
  });
  svr.Get("/api/experiments", [this](const httplib::Request&, httplib::Response& res) { send(res, list_experiments()); });
  svr.Post("/api/experiments", [this](const httplib::Request& req, httplib::Response& res) {
    if (req.get_header_value("Content-Type").rfind("text/plain", 0) == 0) {
      try {
        send(res, create_experiment(train::to_json(train::parse_config_ini(req.body))));
      } catch (const std::exception& e) {
        send(res, {400, {{"error", "invalid config"}, {"violations", json::array({e.what()})}}});
      }
      return;
    }
    json body;
    if (parse_body(req, res, body)) send(res, create_experiment(body));
  });
  svr.Get(R"(/api/experiments/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, get_experiment(req.matches[1]));
  });
  svr.Get(R"(/api/experiments/([^/]+)/checkpoints)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, checkpoints(req.matches[1]));
  });
  svr.Post(R"(/api/experiments/([^/]+)/start)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, start(req.matches[1]));
  });
  svr.Post(R"(/api/experiments/([^/]+)/stop)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, stop(req.matches[1]));
  });

  svr.Get(R"(/api/experiments/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    auto log = events(req.matches[1]);
    if (!log) return send(res, {404, error_body("unknown experiment " + std::string(req.matches[1]))});
    std::string from = req.has_param("from") ? req.get_param_value("from") : req.get_header_value("Last-Event-ID");
    std::size_t start = 0;
    if (!from.empty()) {
      const auto c = parse_cursor(from);
      if (!c) return send(res, {400, error_body("from must be a non-negative integer")});
      start = *c;
    }
    auto cursor = std::make_shared<std::size_t>(start);
    auto idle = std::make_shared<int>(0);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, log, cursor, idle](std::size_t,
                                                                                    httplib::DataSink& sink) {
      if (shutting_down) return false;
      const auto batch = log->since(*cursor);
      if (batch.empty()) {
        if (log->terminated()) {
          sink.done();
          return true;
        }
        log->wait(*cursor, std::chrono::milliseconds(200));
        // Comment lines keep the connection checked while nothing happens.
        if (++*idle % 10 == 0) {
          static constexpr char kBeat[] = ": keepalive\n\n";
          if (!sink.write(kBeat, sizeof kBeat - 1)) return false;
        }
        return true;
      }
      *idle = 0;
      for (const auto& e : batch) {
        ++*cursor;
        const std::string chunk = "id: " + std::to_string(*cursor) + "\ndata: " + train::to_json(e).dump() + "\n\n";
        if (!sink.write(chunk.data(), chunk.size())) return false;
        if (train::is_terminal(e.kind)) {
          sink.done();
          return true;
        }
      }
      return true;
    });
  });

  svr.Post("/api/infer", [this](const httplib::Request& req, httplib::Response& res) {
    InferRequest in;
    in.content_type = req.get_header_value("Content-Type");
    in.body = req.body;
    in.checkpoint = req.has_param("checkpoint") ? req.get_param_value("checkpoint") : req.get_header_value("X-Checkpoint");
    in.shape = req.has_param("shape") ? req.get_param_value("shape") : req.get_header_value("X-Shape");
    in.baseline = req.get_param_value("baseline");
    const InferReply out = infer(*this, in);
    res.status = out.status;
    for (const auto& [k, v] : out.headers) res.set_header(k, v);
    res.set_content(out.body, out.content_type);
  });
}

void serve(Service& service, const std::string& host, int port, const std::atomic<bool>& stop,
           const std::function<void(int)>& on_listen) {
  httplib::Server svr;
  service.mount(svr);
  int bound = port;
  if (port == 0) {
    bound = svr.bind_to_any_port(host);
  } else if (!svr.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  std::atomic<bool> done{false};
  std::thread watcher([&] {
    while (!stop.load() && !done.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    svr.stop();
  });
  if (on_listen) on_listen(bound);
  svr.listen_after_bind();
  done = true;
  watcher.join();
}

}  // namespace spectrai::service
