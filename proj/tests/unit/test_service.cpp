#include "doctest.h"

#include <cstring>
#include <set>
#include <thread>

#include "spectrai/io/envi.hpp"
#include "spectrai/io/tables.hpp"
#include "spectrai/nn/archive.hpp"
#include "spectrai/service/infer.hpp"
#include "spectrai/service/service.hpp"
#include "spectrai/train/trainer.hpp"
#include "../support/fixtures.hpp"
#include "../support/http.hpp"

using namespace spectrai;
using nlohmann::json;
using spectrai::testing::ServerHarness;
using spectrai::testing::TempDir;

namespace {

std::set<std::string> as_set(const json& list) {
  std::set<std::string> s;
  for (const auto& v : list) s.insert(v.get<std::string>());
  return s;
}

nn::NetworkConfig tiny_network(NetworkFamily family) {
  auto c = nn::default_network_config(family, 2, 2);
  c.depth = 1;
  c.base_channels = 4;
  c.rcan = {1, 1, 4, 2, 2};
  return c;
}

bool builds(TaskKind task, NetworkFamily family) {
  try {
    nn::build_network<float>(task, tiny_network(family));
    return true;
  } catch (const GateError&) {
    return false;
  }
}

json task_entry(const json& payload, TaskKind task) {
  for (const auto& t : payload.at("tasks"))
    if (t.at("kind") == to_string(task)) return t;
  return nullptr;
}

json post_json(httplib::Client& c, const std::string& path, const json& body, int* status) {
  auto r = c.Post(path, body.dump(), "application/json");
  REQUIRE(r);
  *status = r->status;
  return r->body.empty() ? json() : json::parse(r->body);
}

json get_json(httplib::Client& c, const std::string& path, int* status) {
  auto r = c.Get(path);
  REQUIRE(r);
  *status = r->status;
  return json::parse(r->body);
}

}  // namespace

TEST_CASE("tasks payload matches the network, loss and augmentation gates") {
  const json payload = service::tasks_payload();
  REQUIRE(payload.at("tasks").size() == std::size(kAllTasks));
  for (TaskKind task : kAllTasks) {
    CAPTURE(to_string(task));
    const json t = task_entry(payload, task);
    REQUIRE(!t.is_null());
    const auto nets = as_set(t.at("networks"));
    for (NetworkFamily f : kAllFamilies) {
      CAPTURE(to_string(f));
      CHECK(nets.count(std::string(to_string(f))) == (builds(task, f) ? 1u : 0u));
    }
    const auto losses = as_set(t.at("losses"));
    for (LossKind l : kAllLosses) {
      bool ok = true;
      try {
        require_loss(task, l);
      } catch (const GateError&) {
        ok = false;
      }
      CHECK(losses.count(std::string(to_string(l))) == (ok ? 1u : 0u));
    }
    const auto augs = as_set(t.at("augmentations"));
    for (AugmentKind a : kAllAugmentations) {
      AugmentationPolicy p{task, {AugmentationSpec{a}}};
      bool ok = true;
      try {
        p.validate();
      } catch (const GateError&) {
        ok = false;
      }
      CHECK(augs.count(std::string(to_string(a))) == (ok ? 1u : 0u));
    }
  }
}

TEST_CASE("tasks payload examples") {
  const json payload = service::tasks_payload();
  const auto seg = task_entry(payload, TaskKind::Segmentation);
  CHECK(as_set(seg.at("losses")).count("cross_entropy") == 1);
  CHECK(as_set(seg.at("losses")).count("l1") == 0);
  const auto sr = task_entry(payload, TaskKind::SuperResolution);
  CHECK(sr.at("defaults").at("hyper").at("batch_size") == 2);
  CHECK(sr.at("defaults").at("hyper").at("epochs") == 500);
  CHECK(as_set(task_entry(payload, TaskKind::SpectrumDenoising).at("augmentations")).count("hflip") == 0);
  CHECK(service::tasks_payload().dump() == payload.dump());
}

TEST_CASE("service over HTTP") {
  TempDir data("svc-data"), root("svc-root");
  const auto manifest = testing::synth_denoising(data.path(), 48, 64);
  ServerHarness server(root.path());
  auto c = server.client();
  int status = 0;

  SUBCASE("tasks endpoint is stable") {
    auto a = c.Get("/api/tasks");
    auto b = c.Get("/api/tasks");
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->status == 200);
    CHECK(a->body == b->body);
    CHECK(json::parse(a->body) == service::tasks_payload());
    CHECK(a->get_header_value("Access-Control-Allow-Origin") == "*");
  }

  SUBCASE("datasets register and list") {
    auto d = post_json(c, "/api/datasets", {{"manifest", manifest.string()}, {"name", "peaks"}}, &status);
    CHECK(status == 201);
    CHECK(d.at("id") == "ds-1");
    CHECK(d.at("records") == 1);
    CHECK(as_set(d.at("tasks")).count("SpectrumDenoising") == 1);
    post_json(c, "/api/datasets", {{"manifest", (data / "missing.json").string()}}, &status);
    CHECK(status == 404);
    post_json(c, "/api/datasets", {{"nope", 1}}, &status);
    CHECK(status == 400);
    CHECK(get_json(c, "/api/datasets", &status).size() == 1);
  }

  SUBCASE("experiment lifecycle, events and inference") {
    const auto cfg = testing::tiny_denoising_config(manifest, data / "ignored", 3);
    json rec = post_json(c, "/api/experiments", train::to_json(cfg), &status);
    CHECK(status == 201);
    CHECK(rec.at("state") == "created");
    const std::string id = rec.at("id");

    // A created experiment streams nothing yet; hang up after a short wait.
    {
      httplib::Client sc("127.0.0.1", server.port());
      sc.set_read_timeout(0, 600000);
      testing::SseParser parser;
      sc.Get("/api/experiments/" + id + "/events", [&](const char* d, std::size_t n) {
        parser.feed(d, n);
        return true;
      });
      CHECK(parser.frames.empty());
    }

    post_json(c, "/api/experiments/" + id + "/start", json::object(), &status);
    CHECK(status == 200);
    post_json(c, "/api/experiments/" + id + "/start", json::object(), &status);
    CHECK(status == 409);
    server.service().wait(id);
    rec = get_json(c, "/api/experiments/" + id, &status);
    CHECK(rec.at("state") == "finished");
    post_json(c, "/api/experiments/" + id + "/stop", json::object(), &status);
    CHECK(status == 409);
    post_json(c, "/api/experiments/" + id + "/start", json::object(), &status);
    CHECK(status == 409);

    const auto all = testing::read_events(server.port(), id, 0, 100000);
    REQUIRE(all.size() >= 4);
    CHECK(all.back().data.at("kind") == "finished");
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i].id == i + 1);

    // Reconnecting from any acknowledged id continues without gaps or repeats.
    for (std::size_t cut : {std::size_t(1), all.size() / 2, all.size() - 1}) {
      const auto head = testing::read_events(server.port(), id, 0, cut);
      REQUIRE(head.size() == cut);
      const auto tail = testing::read_events(server.port(), id, *head.back().id, 100000, cut % 2 == 0);
      REQUIRE(head.size() + tail.size() == all.size());
      for (std::size_t i = 0; i < tail.size(); ++i) CHECK(tail[i].data == all[cut + i].data);
    }

    const json cps = get_json(c, "/api/experiments/" + id + "/checkpoints", &status);
    CHECK(status == 200);
    REQUIRE(cps.size() == 2);
    CHECK(cps[0].at("epoch") == 3);

    const std::string cp = id + "/latest";
    std::vector<float> spectrum(64);
    for (int i = 0; i < 64; ++i) spectrum[i] = 0.5f + 0.3f * std::sin(0.2f * i);
    auto r1 = c.Post("/api/infer", json{{"checkpoint", cp}, {"spectrum", spectrum}}.dump(), "application/json");
    auto r2 = c.Post("/api/infer", json{{"checkpoint", cp}, {"spectrum", spectrum}}.dump(), "application/json");
    REQUIRE(r1);
    REQUIRE(r2);
    CHECK(r1->status == 200);
    CHECK(r1->body == r2->body);
    CHECK(json::parse(r1->body).at("spectrum").size() == 64);

    auto bad = c.Post("/api/infer", json{{"checkpoint", cp}, {"spectrum", {1.0, 2.0, 3.0}}}.dump(),
                      "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body).at("expected_bands") == 64);
    auto unknown = c.Post("/api/infer", json{{"checkpoint", "exp-9999/latest"}, {"spectrum", spectrum}}.dump(),
                          "application/json");
    REQUIRE(unknown);
    CHECK(unknown->status == 404);
  }

  SUBCASE("invalid configs and unknown ids") {
    auto cfg = train::to_json(testing::tiny_denoising_config(manifest, data / "x"));
    cfg["network"]["family"] = "unet2d";
    json r = post_json(c, "/api/experiments", cfg, &status);
    CHECK(status == 400);
    CHECK(r.at("violations").size() >= 1);
    cfg = train::to_json(testing::tiny_denoising_config(manifest, data / "x"));
    cfg["hyper"]["bogus"] = 1;
    r = post_json(c, "/api/experiments", cfg, &status);
    CHECK(status == 400);
    CHECK(r.at("violations")[0].get<std::string>().find("hyper.bogus") != std::string::npos);
    get_json(c, "/api/experiments/exp-4242", &status);
    CHECK(status == 404);
    post_json(c, "/api/experiments/exp-4242/start", json::object(), &status);
    CHECK(status == 404);
    get_json(c, "/api/experiments/exp-4242/events", &status);
    CHECK(status == 404);
    auto opt = c.Options("/api/experiments");
    REQUIRE(opt);
    CHECK(opt->status == 204);
  }

  SUBCASE("stop mid-run leaves a stopped record with a checkpoint") {
    json rec = post_json(c, "/api/experiments", train::to_json(testing::tiny_denoising_config(manifest, data / "x", 200)),
                         &status);
    const std::string id = rec.at("id");
    post_json(c, "/api/experiments/" + id + "/start", json::object(), &status);
    REQUIRE(status == 200);
    // Wait for the first finished epoch before stopping.
    auto log = server.service().events(id);
    while (true) {
      bool epoch_done = false;
      for (const auto& e : log->since(0)) epoch_done = epoch_done || e.kind == train::EventKind::EpochEnd;
      if (epoch_done) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    post_json(c, "/api/experiments/" + id + "/stop", json::object(), &status);
    CHECK(status == 202);
    server.service().wait(id);
    rec = get_json(c, "/api/experiments/" + id, &status);
    CHECK(rec.at("state") == "stopped");
    CHECK(rec.at("checkpoints").size() >= 1);
    CHECK(log->since(0).back().kind == train::EventKind::Stopped);
    post_json(c, "/api/experiments/" + id + "/stop", json::object(), &status);
    CHECK(status == 409);
  }

  SUBCASE("INI bodies create experiments") {
    const std::string ini = train::format_config_ini(testing::tiny_denoising_config(manifest, data / "x"));
    auto r = c.Post("/api/experiments", ini, "text/plain");
    REQUIRE(r);
    CHECK(r->status == 201);
  }
}

TEST_CASE("mismatched cube bands name the expected count") {
  TempDir data("svc-cube"), root("svc-cube-root");
  auto r = testing::run_cli({"synth", "segmentation", "--out", data.path().string(), "--count", "6", "--size", "8",
                             "--bands", "4"});
  REQUIRE(r.code == 0);
  ServerHarness server(root.path());
  auto c = server.client();
  auto cfg = train::default_experiment_config(TaskKind::Segmentation);
  cfg.network.in_channels = 4;
  cfg.network.out_channels = 6;
  cfg.network.depth = 1;
  cfg.network.base_channels = 4;
  cfg.hyper.epochs = 1;
  cfg.hyper.batch_size = 4;
  cfg.data.manifest = (data / "manifest.json").string();
  int status = 0;
  const json rec = post_json(c, "/api/experiments", train::to_json(cfg), &status);
  REQUIRE(status == 201);
  const std::string id = rec.at("id");
  post_json(c, "/api/experiments/" + id + "/start", json::object(), &status);
  server.service().wait(id);
  CHECK(get_json(c, "/api/experiments/" + id, &status).at("state") == "finished");

  httplib::Headers h{{"X-Checkpoint", id + "/latest"}, {"X-Shape", "8,8,3"}};
  std::string body(8 * 8 * 3 * 4, '\0');
  auto bad = c.Post("/api/infer", h, body, "application/octet-stream");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).at("expected_bands") == 4);

  h = {{"X-Checkpoint", id + "/latest"}, {"X-Shape", "8,8,4"}};
  std::vector<float> px(8 * 8 * 4, 0.25f);
  body.assign(reinterpret_cast<const char*>(px.data()), px.size() * 4);
  auto ok = c.Post("/api/infer", h, body, "application/octet-stream");
  REQUIRE(ok);
  CHECK(ok->status == 200);
  CHECK(ok->get_header_value("X-Shape") == "8,8");
  REQUIRE(ok->body.size() == 8 * 8 * 2);
  for (std::size_t i = 0; i < 64; ++i) {
    std::uint16_t v;
    std::memcpy(&v, ok->body.data() + 2 * i, 2);
    CHECK(v < 6);
  }
  auto short_body = c.Post("/api/infer", h, body.substr(4), "application/octet-stream");
  REQUIRE(short_body);
  CHECK(short_body->status == 400);
}

TEST_CASE("restart marks an interrupted run as error") {
  TempDir data("svc-restart"), root("svc-restart-root");
  const auto manifest = testing::synth_denoising(data.path(), 32, 64);
  std::string id;
  {
    service::Service svc(service::ServiceOptions{root.path()});
    auto created = svc.create_experiment(train::to_json(testing::tiny_denoising_config(manifest, data / "x", 2)));
    REQUIRE(created.status == 201);
    id = created.body.at("id");
    svc.start(id);
    svc.wait(id);
    REQUIRE(svc.get_experiment(id).body.at("state") == "finished");
  }
  // Rewrite the record as if the process died mid-run.
  const auto rec_path = root / ("experiments/" + id + "/record.json");
  json rec = json::parse(io::read_text_file(rec_path));
  rec["state"] = "running";
  io::write_text_file(rec_path, rec.dump());
  {
    service::Service svc(service::ServiceOptions{root.path()});
    const auto r = svc.get_experiment(id);
    CHECK(r.body.at("state") == "error");
    CHECK(r.body.at("message") == "service restarted during the run");
    const auto events = svc.events(id)->since(0);
    CHECK(events.back().kind == train::EventKind::Finished);
    auto next = svc.create_experiment(train::to_json(testing::tiny_denoising_config(manifest, data / "x", 1)));
    CHECK(next.body.at("id") != id);
  }
}
