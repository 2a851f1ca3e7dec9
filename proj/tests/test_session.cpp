#include "doctest.h"

#include <atomic>
#include <filesystem>
#include <thread>

#include "chorrnn/anim.hpp"
#include "chorrnn/server.hpp"
#include "chorrnn/session.hpp"
#include "httplib.h"

using namespace chorrnn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct StoreFixture {
  fs::path root;
  fs::path models;
  fs::path sessions;

  StoreFixture() {
    static std::atomic<int> counter{0};
    root = fs::temp_directory_path() /
           ("chorrnn_session_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(root);
    models = root / "models";
    sessions = root / "sessions";
    fs::create_directories(models);
    ModelConfig cfg;
    cfg.input_dim = 6;
    cfg.hidden = 8;
    cfg.mixtures = 2;
    Rng rng(1);
    save(Model::create(cfg, rng), models / "tiny.chrn");
  }
  ~StoreFixture() { fs::remove_all(root); }
};

MotionSequence segment(std::size_t frames, double offset, std::size_t joints = 2) {
  MotionSequence s;
  s.joint_names = generic_joint_names(joints);
  for (std::size_t t = 0; t < frames; ++t) s.frames.push_back(Vector(3 * joints, offset + 0.01 * t));
  return s;
}

SamplingPolicy unbiased(std::uint64_t seed) { return parse_policy("unbiased", seed); }

}  // namespace

TEST_CASE_FIXTURE(StoreFixture, "models are listed with their checksum") {
  const auto list = SessionStore(models, sessions).list_models();
  REQUIRE(list.size() == 1);
  CHECK(list[0].id == "tiny");
  CHECK(list[0].config.input_dim == 6);
  CHECK(list[0].checksum.size() == 16);
}

TEST_CASE_FIXTURE(StoreFixture, "create and fetch sessions") {
  SessionStore store(models, sessions);
  const Session a = store.create_session("tiny");
  const Session b = store.create_session("tiny");
  CHECK(a.id != b.id);
  CHECK(a.timeline.empty());
  CHECK(a.pending.empty());
  CHECK(store.get(a.id).id == a.id);
  try {
    store.create_session("nope");
    FAIL("expected not found");
  } catch (const SessionError& e) {
    CHECK(e.kind() == SessionError::Kind::kNotFound);
  }
  CHECK_THROWS_AS(store.get("missing"), SessionError);
  CHECK_THROWS_AS(store.create_session("../models/tiny"), SessionError);
}

TEST_CASE_FIXTURE(StoreFixture, "the alternating workflow") {
  SessionStore store(models, sessions);
  const std::string id = store.create_session("tiny").id;
  Session s = store.add_human_segment(id, segment(10, 0.0));
  CHECK(s.timeline.size() == 1);

  CHECK_THROWS_AS(store.accept_candidate(id, 0), SessionError);

  const auto cands = store.generate_candidates(id, 3, 12, unbiased(7));
  CHECK(cands.size() == 3);
  s = store.get(id);
  CHECK(s.timeline.size() == 1);
  CHECK(s.pending.size() == 3);
  CHECK_FALSE(cands[0].frames == cands[1].frames);

  SUBCASE("candidates are reproducible from the seed") {
    const auto again = store.generate_candidates(id, 3, 12, unbiased(7));
    for (std::size_t i = 0; i < 3; ++i) CHECK(again[i].frames == cands[i].frames);
  }
  SUBCASE("greedy candidates are identical") {
    const auto g = store.generate_candidates(id, 2, 12, parse_policy("greedy"));
    CHECK(g[0].frames == g[1].frames);
  }
  SUBCASE("accept, then human, then export") {
    CHECK_THROWS_AS(store.accept_candidate(id, 3), SessionError);
    s = store.accept_candidate(id, 1);
    CHECK(s.timeline.size() == 2);
    CHECK(s.pending.empty());
    CHECK(s.timeline[1].author == Author::kMachine);
    CHECK(s.timeline[1].frames == cands[1].frames);
    try {
      store.accept_candidate(id, 0);
      FAIL("expected conflict");
    } catch (const SessionError& e) {
      CHECK(e.kind() == SessionError::Kind::kConflict);
    }
    CHECK(store.reproduce(id, 1) == cands[1].frames);
    CHECK_THROWS_AS(store.reproduce(id, 0), SessionError);

    s = store.add_human_segment(id, segment(5, 1.0));
    CHECK(s.timeline.size() == 3);
    CHECK(s.total_frames() == 27);

    const auto full = store.export_timeline(id, ExportSelection::kFull);
    CHECK(full.frames.size() == 27);
    CHECK(full.frames[10] == cands[1].frames.frames[0]);
    const auto human = store.export_timeline(id, ExportSelection::kHumanOnly);
    CHECK(human.frames.size() == 15);
    CHECK(human.frames[10] == segment(5, 1.0).frames[0]);
    CHECK(store.export_timeline(id, ExportSelection::kMachineOnly).frames == cands[1].frames.frames);

    // A new store over the same directory sees the same state.
    SessionStore reopened(models, sessions);
    CHECK(reopened.export_timeline(id, ExportSelection::kFull) == full);
    CHECK(reopened.reproduce(id, 1) == cands[1].frames);
  }
  SUBCASE("a human segment clears pending candidates") {
    s = store.add_human_segment(id, segment(4, 2.0));
    CHECK(s.pending.empty());
    CHECK(s.timeline.size() == 2);
  }
}

TEST_CASE_FIXTURE(StoreFixture, "validation") {
  SessionStore store(models, sessions, 50);
  const std::string id = store.create_session("tiny").id;
  CHECK_THROWS_AS(store.generate_candidates(id, 1, 5, unbiased(1)), SessionError);
  CHECK_THROWS_AS(store.export_timeline(id, ExportSelection::kFull), SessionError);
  store.add_human_segment(id, segment(5, 0.0));
  const auto before = store.get(id);
  CHECK_THROWS_AS(store.add_human_segment(id, segment(5, 0.0, 3)), SessionError);
  CHECK(store.get(id).timeline.size() == before.timeline.size());
  CHECK_THROWS_AS(store.add_human_segment(id, segment(0, 0.0)), SessionError);
  CHECK_THROWS_AS(store.add_human_segment(id, segment(60, 0.0)), SessionError);
  CHECK_THROWS_AS(store.generate_candidates(id, 0, 5, unbiased(1)), SessionError);
  CHECK_THROWS_AS(store.generate_candidates(id, 10, 10, unbiased(1)), SessionError);
  try {
    store.export_timeline(id, ExportSelection::kMachineOnly);
    FAIL("expected empty selection error");
  } catch (const SessionError& e) {
    CHECK(e.kind() == SessionError::Kind::kConflict);
  }
  CHECK(parse_export_selection("human_only") == ExportSelection::kHumanOnly);
  CHECK_THROWS(parse_export_selection("both"));
}

TEST_CASE_FIXTURE(StoreFixture, "HTTP API") {
  SessionStore store(models, sessions, 1000);
  httplib::Server server;
  mount_session_api(server, store);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  auto post = [&](const std::string& path, const json& body) {
    auto r = client.Post(path, body.dump(), "application/json");
    REQUIRE(r);
    return std::make_pair(r->status, json::parse(r->body));
  };

  auto models_res = client.Get("/models");
  REQUIRE(models_res);
  CHECK(models_res->status == 200);
  CHECK(json::parse(models_res->body)["models"][0]["id"] == "tiny");

  auto [st, created] = post("/sessions", {{"model_id", "tiny"}});
  CHECK(st == 201);
  const std::string id = created["id"];
  CHECK(created["timeline"].empty());

  auto [st404, err404] = post("/sessions", {{"model_id", "zzz"}});
  CHECK(st404 == 404);
  CHECK(err404["code"] == "not_found");
  CHECK(err404.contains("message"));

  auto missing = client.Get("/sessions/nothere");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  const auto seed = segment(8, 0.0);
  auto [st_seg, doc] = post("/sessions/" + id + "/segments", {{"frames", frames_to_json(seed)}});
  CHECK(st_seg == 200);
  CHECK(doc["timeline"].size() == 1);
  CHECK(doc["timeline"][0]["author"] == "human");

  auto [st_text, doc_text] = post("/sessions/" + id + "/segments", {{"sequence", sequence_to_text(segment(3, 0.5))}});
  CHECK(st_text == 200);
  CHECK(doc_text["total_frames"] == 11);

  auto [st_bad, bad] = post("/sessions/" + id + "/segments", {{"frames", json::array({json::array({1.0, 2.0})})}});
  CHECK(st_bad == 400);
  auto [st_big, big] = post("/sessions/" + id + "/segments", {{"frames", json(std::vector<Vector>(1001, Vector(6, 0.0)))}});
  CHECK(st_big == 413);
  CHECK(big["code"] == "too_large");

  auto malformed = client.Post("/sessions/" + id + "/accept", "{not json", "application/json");
  REQUIRE(malformed);
  CHECK(malformed->status == 400);

  auto [st_c, cands] = post("/sessions/" + id + "/candidates",
                            {{"k", 3}, {"steps", 6}, {"policy", {{"mode", "unbiased"}, {"seed", 42}}}});
  CHECK(st_c == 200);
  CHECK(cands["candidates"].size() == 3);
  CHECK(cands["session"]["pending"].size() == 3);
  CHECK(cands["candidates"][2]["provenance"]["policy"]["seed"] == 44);

  auto [st_a, accepted] = post("/sessions/" + id + "/accept", {{"index", 2}});
  CHECK(st_a == 200);
  CHECK(accepted["timeline"].size() == 3);
  CHECK(accepted["timeline"][2]["author"] == "machine");
  auto [st_again, again] = post("/sessions/" + id + "/accept", {{"index", 0}});
  CHECK(st_again == 409);

  auto exp = client.Get("/sessions/" + id + "/export?which=machine_only");
  REQUIRE(exp);
  CHECK(exp->status == 200);
  const auto machine = parse_sequence_text(exp->body);
  CHECK(machine.frames.size() == 6);
  CHECK(json(machine.frames) == cands["candidates"][2]["frames"]);

  auto bad_which = client.Get("/sessions/" + id + "/export?which=everything");
  REQUIRE(bad_which);
  CHECK(bad_which->status == 400);

  server.stop();
  thread.join();
}

TEST_CASE("animation json") {
  MotionSequence s;
  s.joint_names = kinect_joint_names();
  s.frames.assign(3, Vector(75, 0.0));
  const json j = animation_json(s);
  CHECK(j["bones"].size() == 24);
  CHECK(j["trajectories"].size() == 25);
  CHECK(j["frames"].size() == 3);
  CHECK(bones_for(generic_joint_names(3)).empty());
}
