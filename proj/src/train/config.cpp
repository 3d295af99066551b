#include "spectrai/train/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <sstream>

#include "spectrai/io/envi.hpp"
#include "spectrai/nn/archive.hpp"
#include "spectrai/io/json_fields.hpp"
#include "spectrai/pipeline/rng.hpp"

namespace spectrai::train {

using nlohmann::json;
using io::get_bool;
using io::get_number;
using io::get_string;
using io::reject_unknown;

namespace {

const char* const kSections[] = {"task", "network", "hyper", "augmentation", "split", "data"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const GateError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

std::optional<NormalizeMode> parse_normalize_option(const std::string& text) {
  if (text == "none") return std::nullopt;
  return parse_normalize_mode(text);
}

std::vector<std::string> permitted_normalize(TaskKind task) {
  const bool regression = task == TaskKind::SpectrumDenoising || task == TaskKind::ImageDenoising ||
                          task == TaskKind::SuperResolution;
  if (regression) return {"none", "minmax"};
  std::vector<std::string> out{"none"};
  for (auto m : {NormalizeMode::MinMax, NormalizeMode::Max, NormalizeMode::Area, NormalizeMode::L2,
                 NormalizeMode::ZScore})
    out.emplace_back(to_string(m));
  return out;
}

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> out;
  auto check = [&](auto&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      out.emplace_back(e.what());
    }
  };
  check([&] { require_family(task, network.family); });
  check([&] { require_loss(task, hyper.loss); });
  check([&] {
    if (augmentation.task != task) throw GateError("augmentation policy belongs to another task");
    augmentation.validate();
  });
  check([&] { network.validate(); });
  check([&] { hyper.validate(); });
  check([&] { split.validate(); });
  check([&] {
    const auto allowed = permitted_normalize(task);
    if (std::find(allowed.begin(), allowed.end(), data.normalize) == allowed.end())
      throw ConfigError("data.normalize: " + std::string(to_string(task)) + " does not accept '" + data.normalize + "'");
  });
  if (data.output_dir.empty()) out.emplace_back("data.output_dir must not be empty");
  return out;
}

void ExperimentConfig::validate() const {
  try {
    require_family(task, network.family);
    require_loss(task, hyper.loss);
    if (augmentation.task != task) throw GateError("augmentation policy belongs to another task");
    augmentation.validate();
  } catch (const GateError&) {
    throw;
  } catch (const std::exception& e) {
    throw GateError(e.what());
  }
  const auto v = violations();
  if (!v.empty()) throw ConfigError(v.front());
}

ExperimentConfig default_experiment_config(TaskKind task) {
  ExperimentConfig c;
  c.name = std::string(to_string(task));
  c.task = task;
  const NetworkFamily family = permitted_families(task).front();
  c.network = nn::default_network_config(family, 1, 1);
  c.hyper = default_hyperparameters(task);
  c.augmentation.task = task;
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["task"] = {{"kind", std::string(to_string(c.task))}, {"name", c.name}};
  j["network"] = nn::to_json(c.network);
  j["hyper"] = to_json(c.hyper);
  json add = json::array();
  for (const auto& s : c.augmentation.specs) add.push_back(format_augmentation_spec(s));
  j["augmentation"] = {{"add", add}};
  j["split"] = {{"train", c.split.train},
                {"val", c.split.val},
                {"test", c.split.test},
                {"seed", c.split.seed},
                {"group_aware", c.split.group_aware}};
  j["data"] = {{"manifest", c.data.manifest}, {"output_dir", c.data.output_dir}, {"normalize", c.data.normalize}};
  return j;
}

json to_json(const Hyperparameters& h) {
  return {{"learning_rate", h.learning_rate},
          {"batch_size", h.batch_size},
          {"epochs", h.epochs},
          {"loss", std::string(to_string(h.loss))},
          {"schedule", std::string(to_string(h.schedule))},
          {"beta1", h.beta1},
          {"beta2", h.beta2},
          {"epsilon", h.epsilon},
          {"seed", h.seed},
          {"warmup_fraction", h.one_cycle.warmup_fraction},
          {"div_factor", h.one_cycle.div_factor},
          {"final_div_factor", h.one_cycle.final_div_factor},
          {"log_every", h.log_every},
          {"ignore_label", h.ignore_label ? json(*h.ignore_label) : json(nullptr)},
          {"deterministic", h.deterministic}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  reject_unknown(j, {std::begin(kSections), std::end(kSections)}, "config");
  const json empty = json::object();
  auto section = [&](const char* name) -> const json& { return j.contains(name) ? j.at(name) : empty; };

  const json& t = section("task");
  reject_unknown(t, {"kind", "name"}, "task");
  if (!t.contains("kind")) throw ConfigError("task.kind: required");
  const TaskKind task = with_path("task.kind", [&] { return parse_task(get_string(t, "kind", "", "task")); });
  ExperimentConfig c = default_experiment_config(task);
  c.name = get_string(t, "name", c.name, "task");

  json net = section("network");
  if (!net.contains("family")) net["family"] = std::string(to_string(c.network.family));
  c.network = with_path("network", [&] { return nn::network_config_from_json(net, "network"); });

  const json& h = section("hyper");
  reject_unknown(h,
                 {"learning_rate", "batch_size", "epochs", "loss", "schedule", "beta1", "beta2", "epsilon", "seed",
                  "warmup_fraction", "div_factor", "final_div_factor", "log_every", "ignore_label",
                  "deterministic"},
                 "hyper");
  auto& hp = c.hyper;
  hp.learning_rate = get_number<double>(h, "learning_rate", hp.learning_rate, "hyper");
  hp.batch_size = get_number<int>(h, "batch_size", hp.batch_size, "hyper");
  hp.epochs = get_number<int>(h, "epochs", hp.epochs, "hyper");
  if (h.contains("loss"))
    hp.loss = with_path("hyper.loss", [&] { return parse_loss(get_string(h, "loss", "", "hyper")); });
  if (h.contains("schedule"))
    hp.schedule = with_path("hyper.schedule", [&] { return parse_schedule(get_string(h, "schedule", "", "hyper")); });
  hp.beta1 = get_number<double>(h, "beta1", hp.beta1, "hyper");
  hp.beta2 = get_number<double>(h, "beta2", hp.beta2, "hyper");
  hp.epsilon = get_number<double>(h, "epsilon", hp.epsilon, "hyper");
  hp.seed = get_number<std::uint64_t>(h, "seed", hp.seed, "hyper");
  hp.one_cycle.warmup_fraction = get_number<double>(h, "warmup_fraction", hp.one_cycle.warmup_fraction, "hyper");
  hp.one_cycle.div_factor = get_number<double>(h, "div_factor", hp.one_cycle.div_factor, "hyper");
  hp.one_cycle.final_div_factor = get_number<double>(h, "final_div_factor", hp.one_cycle.final_div_factor, "hyper");
  hp.log_every = get_number<int>(h, "log_every", hp.log_every, "hyper");
  if (h.contains("ignore_label")) {
    const json& v = h.at("ignore_label");
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "none"))
      hp.ignore_label.reset();
    else
      hp.ignore_label = get_number<int>(h, "ignore_label", 0, "hyper");
  }
  hp.deterministic = get_bool(h, "deterministic", hp.deterministic, "hyper");

  const json& a = section("augmentation");
  reject_unknown(a, {"add"}, "augmentation");
  if (a.contains("add")) {
    json list = a.at("add");
    if (list.is_string()) list = json::array({list});
    if (!list.is_array()) throw ConfigError("augmentation.add: expected a list of specs");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "augmentation.add[" + std::to_string(i) + "]";
      if (!list[i].is_string()) throw ConfigError(path + ": expected a string");
      c.augmentation.specs.push_back(
          with_path(path, [&] { return parse_augmentation_spec(list[i].get<std::string>()); }));
    }
  }

  const json& s = section("split");
  reject_unknown(s, {"ratios", "train", "val", "test", "seed", "group_aware"}, "split");
  if (s.contains("ratios"))
    c.split = with_path("split.ratios", [&] { return parse_split_ratios(get_string(s, "ratios", "", "split")); });
  c.split.train = get_number<double>(s, "train", c.split.train, "split");
  c.split.val = get_number<double>(s, "val", c.split.val, "split");
  c.split.test = get_number<double>(s, "test", c.split.test, "split");
  c.split.seed = get_number<std::uint64_t>(s, "seed", c.split.seed, "split");
  c.split.group_aware = get_bool(s, "group_aware", c.split.group_aware, "split");

  const json& d = section("data");
  reject_unknown(d, {"manifest", "output_dir", "normalize"}, "data");
  c.data.manifest = get_string(d, "manifest", c.data.manifest, "data");
  c.data.output_dir = get_string(d, "output_dir", c.data.output_dir, "data");
  c.data.normalize = get_string(d, "normalize", c.data.normalize, "data");
  with_path("data.normalize", [&] { return parse_normalize_option(c.data.normalize); });
  return c;
}

ExperimentConfig parse_config_ini(std::string_view text) {
  json doc = json::object();
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      bool known = false;
      for (const char* s : kSections) known = known || section == s;
      if (!known) throw ConfigError("unknown key " + section + " (" + where + ")");
      if (!doc.contains(section)) doc[section] = json::object();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside a section");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    json& sec = doc[section];
    if (section == "augmentation" && key == "add") {
      if (!sec.contains("add")) sec["add"] = json::array();
      sec["add"].push_back(value);
      continue;
    }
    if (sec.contains(key)) throw ConfigError(where + ": duplicate key " + section + "." + key);
    sec[key] = value;
  }
  return experiment_config_from_json(doc);
}

std::string format_config_ini(const ExperimentConfig& c) {
  const json j = to_json(c);
  std::ostringstream out;
  bool first = true;
  for (const char* name : kSections) {
    if (!first) out << "\n";
    first = false;
    out << "[" << name << "]\n";
    const json& sec = j.at(name);
    for (auto it = sec.begin(); it != sec.end(); ++it) {
      const json& v = it.value();
      if (it.key() == "add") {
        for (const auto& spec : v) out << "add = " << spec.get<std::string>() << "\n";
      } else if (v.is_string()) {
        out << it.key() << " = " << v.get<std::string>() << "\n";
      } else if (v.is_null()) {
        out << it.key() << " = none\n";
      } else {
        out << it.key() << " = " << v.dump() << "\n";
      }
    }
  }
  return out.str();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = io::read_text_file(path);
  const auto start = text.find_first_not_of(" \t\r\n");
  ExperimentConfig c;
  if (start != std::string::npos && text[start] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config JSON: ") + e.what());
    }
    c = experiment_config_from_json(j);
  } else {
    c = parse_config_ini(text);
  }
  if (!c.data.manifest.empty()) c.data.manifest = resolve_data_path(c.data.manifest).string();
  return c;
}

std::filesystem::path resolve_data_path(const std::string& path) {
  const char* root = std::getenv("SPECTRAI_DATA_DIR");
  if (root && *root && std::filesystem::path(path).is_relative()) return std::filesystem::path(root) / path;
  return path;
}

std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
  return buf;
}

}  // namespace spectrai::train
