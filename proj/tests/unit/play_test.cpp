#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "../support/scripted.hpp"
#include "iad/common/error.hpp"
#include "iad/common/io.hpp"
#include "iad/env/observation.hpp"
#include "iad/play/protocol.hpp"
#include "iad/play/server.hpp"
#include "iad/play/session.hpp"
#include "iad/population/bc.hpp"

using namespace iad;
using namespace iad::play;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::shared_ptr<const policy::HierarchicalPolicy> small_agent(int skills = 4, int height = 4,
                                                              int width = 5) {
  policy::PolicyConfig pc;
  pc.num_skills = skills;
  pc.height = height;
  pc.width = width;
  pc.conv_channels = {4, 4, 4};
  pc.dense = {8, 8};
  pc.recurrent = 8;
  return std::make_shared<policy::HierarchicalPolicy>(pc, 3);
}

SessionConfig session_config(int human = env::kBlue, int horizon = 12) {
  SessionConfig c;
  c.layout = iad::testing::shipped_layout("cramped_room_mini");
  c.layout.horizon = horizon;
  c.policy = small_agent();
  c.human = human;
  c.seed = 8;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("iad_play_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

// ------------------------------------------------------------------ protocol

TEST(Protocol, ParsesClientMessages) {
  const auto join = std::get<JoinMessage>(
      parse_client_message(R"({"type":"join","layout":"cramped_room_mini","side":"green"})"));
  EXPECT_EQ(join.layout, "cramped_room_mini");
  EXPECT_EQ(join.side, env::kGreen);
  EXPECT_TRUE(join.show_skill);
  const auto action = std::get<ActionMessage>(parse_client_message(R"({"type":"action","action":"interact","seq":7})"));
  EXPECT_EQ(action.action, env::Action::kInteract);
  EXPECT_EQ(action.seq, 7);
  for (const char* name : {"up", "down", "left", "right", "stay", "interact"}) {
    const json j = {{"type", "action"}, {"action", name}, {"seq", 1}};
    EXPECT_EQ(env::action_name(std::get<ActionMessage>(parse_client_message(j.dump())).action), name);
  }
}

TEST(Protocol, RoundTripsThroughJson) {
  const JoinMessage j{"coordination_ring_mini", env::kBlue, false};
  const auto back = std::get<JoinMessage>(parse_client_message(to_json(j).dump()));
  EXPECT_EQ(back.layout, j.layout);
  EXPECT_EQ(back.side, j.side);
  EXPECT_EQ(back.show_skill, false);
  const ActionMessage a{env::Action::kLeft, 42};
  const auto a2 = std::get<ActionMessage>(parse_client_message(to_json(a).dump()));
  EXPECT_EQ(a2.action, a.action);
  EXPECT_EQ(a2.seq, 42);
}

TEST(Protocol, RejectsMalformedMessages) {
  for (const char* bad : {"not json", "[1,2]", R"({"layout":"x"})", R"({"type":"dance"})",
                          R"({"type":"join","side":"blue"})",
                          R"({"type":"join","layout":"x","side":"red"})",
                          R"({"type":"action","action":"jump","seq":1})",
                          R"({"type":"action","action":"up"})",
                          R"({"type":"action","action":"up","seq":"1"})",
                          R"({"type":"action","action":"up","seq":1.5})",
                          R"({"type":"join","layout":"x","side":"blue","show_skill":"yes"})"}) {
    EXPECT_THROW(parse_client_message(bad), ProtocolError) << bad;
  }
  EXPECT_EQ(error_message("boom"), (json{{"type", "error"}, {"message", "boom"}}));
}

TEST(Protocol, StateMessageSchema) {
  Session s("abc", session_config(env::kGreen));
  const json m = s.state_message();
  EXPECT_EQ(m["type"], "state");
  EXPECT_EQ(m["session"], "abc");
  EXPECT_EQ(m["t"], 0);
  EXPECT_EQ(m["done"], false);
  EXPECT_EQ(m["horizon"], 12);
  EXPECT_EQ(m["you"], "green");
  ASSERT_EQ(m["grid"].size(), 4u);
  EXPECT_EQ(m["grid"][0].get<std::string>().size(), 5u);
  ASSERT_EQ(m["players"].size(), 2u);
  EXPECT_EQ(m["players"][1]["controller"], "human");
  EXPECT_EQ(m["players"][0]["controller"], "agent");
  for (const char* key : {"x", "y", "orientation", "held", "side"}) EXPECT_TRUE(m["players"][0].contains(key));
  ASSERT_EQ(m["pots"].size(), 1u);
  EXPECT_EQ(m["pots"][0]["onions"], 0);
  EXPECT_EQ(m["pots"][0]["cook_timer"], -1);
  EXPECT_TRUE(m["counters"].is_array());
  EXPECT_EQ(m["rewards"]["total"], 0.0);
  EXPECT_TRUE(m["active_skill"].is_null());
  EXPECT_EQ(m["last_seq"], -1);
}

// ------------------------------------------------------------------- session

TEST(Session, GreenSideGetsGreenStart) {
  Session s("s", session_config(env::kGreen));
  const json m = s.state_message();
  const auto& layout = s.config().layout;
  EXPECT_EQ(m["players"][1]["x"], layout.start[env::kGreen].x);
  EXPECT_EQ(m["players"][1]["y"], layout.start[env::kGreen].y);
  EXPECT_EQ(m["players"][1]["side"], "green");
}

TEST(Session, IdsAreDistinctAndSessionsIndependent) {
  Rng rng(1);
  std::set<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.insert(new_session_id(rng));
  EXPECT_EQ(ids.size(), 100u);
  Session a("a", session_config()), b("b", session_config());
  ASSERT_FALSE(a.submit(env::Action::kRight, 1));
  a.tick();
  a.tick();
  EXPECT_EQ(a.state().t, 2);
  EXPECT_EQ(b.state().t, 0);
  EXPECT_EQ(b.state(), env::reset(b.config().layout));
}

TEST(Session, MissingInputMeansStayAndLastWriteWins) {
  Session s("s", session_config());
  s.tick();
  EXPECT_EQ(s.records().back().actions[env::kBlue], env::Action::kStay);
  ASSERT_FALSE(s.submit(env::Action::kUp, 1));
  ASSERT_FALSE(s.submit(env::Action::kLeft, 2));
  const json m = s.tick();
  EXPECT_EQ(s.records().back().actions[env::kBlue], env::Action::kLeft);
  EXPECT_EQ(m["last_seq"], 2);
  s.tick();  // the buffer empties after a tick
  EXPECT_EQ(s.records().back().actions[env::kBlue], env::Action::kStay);
  // An action that arrives between ticks is not lost.
  ASSERT_FALSE(s.submit(env::Action::kDown, 3));
  s.tick();
  EXPECT_EQ(s.records().back().actions[env::kBlue], env::Action::kDown);
  const auto stale = s.submit(env::Action::kUp, 3);
  ASSERT_TRUE(stale.has_value());
  EXPECT_EQ((*stale)["type"], "error");
}

TEST(Session, RewardTotalsDoneAndExport) {
  SessionConfig cfg = session_config(env::kBlue, 40);
  Session s("s", cfg);
  const auto script = iad::testing::cramped_room_solo_delivery();
  json last;
  double ext = 0.0, shaped = 0.0;
  std::int64_t seq = 0;
  int prev_t = 0;
  while (!s.done()) {
    const std::size_t t = static_cast<std::size_t>(s.state().t);
    if (t < script.size()) {
      ASSERT_FALSE(s.submit(script[t], ++seq));
    }
    last = s.tick();
    ASSERT_EQ(last["t"].get<int>(), prev_t + 1);
    prev_t = last["t"].get<int>();
    ext += last["step_rewards"]["extrinsic"].get<double>();
    shaped += last["step_rewards"]["shaped"].get<double>();
    EXPECT_EQ(last["rewards"]["extrinsic"].get<double>(), ext);
    EXPECT_EQ(last["rewards"]["shaped"].get<double>(), shaped);
    EXPECT_FALSE(last["active_skill"].is_null());
  }
  EXPECT_EQ(last["t"], 40);
  EXPECT_EQ(last["done"], true);
  EXPECT_EQ(s.tick()["type"], "error");
  const auto late = s.submit(env::Action::kUp, ++seq);
  ASSERT_TRUE(late.has_value());
  EXPECT_EQ((*late)["type"], "error");
  EXPECT_EQ(s.records().size(), 40u);

  const fs::path dir = fresh_dir("export");
  s.export_trajectory(dir / "session.jsonl");
  const std::string text = read_text_file(dir / "session.jsonl");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 40);
  const auto records = env::read_trajectory(dir / "session.jsonl");
  const env::ReplayResult replay = env::replay_trajectory(cfg.layout, records);
  EXPECT_EQ(replay.extrinsic_total, s.total_extrinsic());
  EXPECT_EQ(replay.shaped_total, s.total_shaped());

  // The export feeds behavior cloning directly.
  population::BcConfig bc;
  bc.layouts_dir = iad::testing::layouts_dir();
  bc.horizon = 40;
  bc.epochs = 2;
  bc.conv_channels = {4, 4, 4};
  bc.dense = {8, 8};
  bc.recurrent = 8;
  EXPECT_NO_THROW(population::train_bc({dir / "session.jsonl"}, bc, dir / "bc.ckpt"));
}

TEST(Session, AgentMatchesOfflineActor) {
  SessionConfig cfg = session_config(env::kGreen, 30);
  Session live("s", cfg);
  Rng human_rng(4);
  std::int64_t seq = 0;
  while (!live.done()) {
    live.submit(env::action_from_index(static_cast<int>(uniform_index(human_rng, 6))), ++seq);
    live.tick();
  }
  core::PolicyActor offline(cfg.policy, cfg.seed);
  env::GameState state = env::reset(cfg.layout);
  for (const env::TrajectoryRecord& r : live.records()) {
    const env::Action a = offline.act(cfg.layout, state, env::kBlue);
    ASSERT_EQ(a, r.actions[env::kBlue]) << "t = " << r.t;
    ASSERT_EQ(offline.active_skill(), r.agent_skill);
    ASSERT_EQ(offline.skill_is_new(), r.skill_new);
    state = env::step(cfg.layout, state, r.actions[0], r.actions[1]).next;
  }
}

TEST(Session, HiddenSkillAndIncompatiblePolicy) {
  SessionConfig cfg = session_config();
  cfg.show_skill = false;
  Session s("s", cfg);
  EXPECT_TRUE(s.tick()["active_skill"].is_null());
  EXPECT_TRUE(s.records().back().agent_skill.has_value());  // still recorded

  cfg.policy = small_agent(2, 5, 5);
  EXPECT_THROW(Session("x", cfg), ConfigError);
  cfg.policy = nullptr;
  EXPECT_THROW(Session("x", cfg), ConfigError);
}

// -------------------------------------------------------------------- server

TEST(StaticFiles, PathResolution) {
  const fs::path root = "/srv/ui";
  EXPECT_EQ(resolve_static_path(root, "/"), root / "index.html");
  EXPECT_EQ(resolve_static_path(root, "/app.js?v=3"), root / "app.js");
  EXPECT_EQ(resolve_static_path(root, "/assets/"), root / "assets" / "index.html");
  EXPECT_EQ(resolve_static_path(root, "/a/./b.css"), root / "a" / "b.css");
  EXPECT_TRUE(resolve_static_path(root, "/../etc/passwd").empty());
  EXPECT_TRUE(resolve_static_path(root, "/a/../../x").empty());
  EXPECT_TRUE(resolve_static_path(root, "/%2e%2e/x").empty());
  EXPECT_TRUE(resolve_static_path(root, "relative").empty());
  EXPECT_TRUE(resolve_static_path("", "/").empty());
  EXPECT_EQ(mime_type("x/index.html"), "text/html; charset=utf-8");
  EXPECT_EQ(mime_type("x/app.js"), "text/javascript; charset=utf-8");
}

class LiveServer : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fresh_dir("live");
    fs::create_directories(dir_ / "ui");
    write_file_atomic(dir_ / "ui" / "index.html", "<!doctype html><title>play</title>\n");
    write_file_atomic(dir_ / "ui" / "app.js", "console.log('hi');\n");
    ServerConfig cfg;
    cfg.port = 0;
    cfg.static_dir = dir_ / "ui";
    cfg.layouts_dir = iad::testing::layouts_dir();
    cfg.policy = small_agent();
    cfg.tick_ms = 5;
    cfg.horizon = 8;
    cfg.record_dir = dir_ / "records";
    server_ = std::make_unique<PlayServer>(cfg);
    port_ = server_->start();
  }
  void TearDown() override { server_->stop(); }

  std::pair<int, std::string> get(const std::string& target) {
    namespace http = boost::beast::http;
    boost::asio::io_context ioc;
    boost::beast::tcp_stream stream(ioc);
    stream.connect(boost::asio::ip::tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), port_));
    http::request<http::string_body> req(http::verb::get, target, 11);
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    boost::beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(stream, buffer, res);
    boost::beast::error_code ec;
    stream.socket().shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
    return {static_cast<int>(res.result_int()), res.body()};
  }

  fs::path dir_;
  std::unique_ptr<PlayServer> server_;
  unsigned short port_ = 0;
};

TEST_F(LiveServer, ServesStaticFiles) {
  auto [status, body] = get("/");
  EXPECT_EQ(status, 200);
  EXPECT_NE(body.find("<title>play</title>"), std::string::npos);
  EXPECT_EQ(get("/app.js").first, 200);
  EXPECT_EQ(get("/missing.js").first, 404);
  EXPECT_EQ(get("/../CMakeLists.txt").first, 404);
  EXPECT_EQ(get("/health").second, R"({"status":"ok"})");
}

TEST_F(LiveServer, WebsocketSessionRoundTrip) {
  namespace websocket = boost::beast::websocket;
  boost::asio::io_context ioc;
  websocket::stream<boost::beast::tcp_stream> ws(ioc);
  boost::beast::get_lowest_layer(ws).connect(
      boost::asio::ip::tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), port_));
  ws.handshake("127.0.0.1", "/ws");
  auto read = [&] {
    boost::beast::flat_buffer b;
    ws.read(b);
    return json::parse(boost::beast::buffers_to_string(b.data()));
  };
  auto write = [&](const json& j) { ws.write(boost::asio::buffer(j.dump())); };

  write({{"type", "action"}, {"action", "up"}, {"seq", 1}});
  EXPECT_EQ(read()["type"], "error");  // not joined yet
  write({{"type", "join"}, {"layout", "../secret"}, {"side", "blue"}});
  EXPECT_EQ(read()["type"], "error");
  write({{"type", "join"}, {"layout", "no_such_layout"}, {"side", "blue"}});
  EXPECT_EQ(read()["type"], "error");
  ws.write(boost::asio::buffer(std::string("garbage")));
  EXPECT_EQ(read()["type"], "error");

  write({{"type", "join"}, {"layout", "cramped_room_mini"}, {"side", "green"}});
  json m = read();
  ASSERT_EQ(m["type"], "state") << m.dump();
  EXPECT_EQ(m["t"], 0);
  EXPECT_EQ(m["you"], "green");
  const std::string session = m["session"];
  write({{"type", "action"}, {"action", "left"}, {"seq", 2}});
  int last_t = 0;
  bool applied = false;
  while (!m["done"].get<bool>()) {
    m = read();
    if (m["type"] == "error") continue;
    ASSERT_EQ(m["type"], "state");
    EXPECT_EQ(m["session"], session);
    EXPECT_EQ(m["t"].get<int>(), last_t + 1);
    last_t = m["t"].get<int>();
    applied = applied || m["last_seq"] == 2;
  }
  EXPECT_TRUE(applied);
  EXPECT_EQ(last_t, 8);
  write({{"type", "action"}, {"action", "up"}, {"seq", 3}});
  EXPECT_EQ(read()["type"], "error");
  ws.close(websocket::close_code::normal);

  const fs::path exported = dir_ / "records" / ("session_" + session + ".jsonl");
  for (int i = 0; i < 200 && !fs::exists(exported); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ASSERT_TRUE(fs::exists(exported));
  const auto records = env::read_trajectory(exported);
  EXPECT_EQ(records.size(), 8u);
  env::LayoutSpec layout = iad::testing::shipped_layout("cramped_room_mini");
  layout.horizon = 8;
  const env::ReplayResult replay = env::replay_trajectory(layout, records);
  EXPECT_EQ(replay.extrinsic_total, m["rewards"]["extrinsic"].get<double>());
  EXPECT_EQ(replay.shaped_total, m["rewards"]["shaped"].get<double>());
  EXPECT_EQ(records.front().human, env::kGreen);
}

TEST(PlayServer, RejectsBadSettings) {
  ServerConfig cfg;
  cfg.port = 0;
  EXPECT_THROW(PlayServer(cfg).start(), ConfigError);  // no policy
  cfg.policy = small_agent();
  cfg.address = "not an address";
  EXPECT_THROW(PlayServer(cfg).start(), ConfigError);
}
