#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "iad/policy/hierarchical_policy.hpp"

namespace iad::play {

struct ServerConfig {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::filesystem::path static_dir;  // web UI bundle; empty disables static files
  std::filesystem::path layouts_dir = "layouts";
  std::shared_ptr<const policy::HierarchicalPolicy> policy;
  int tick_ms = 150;
  int horizon = 0;  // 0 keeps the layout's horizon
  std::filesystem::path record_dir;  // finished sessions are exported here when set
  std::uint64_t seed = 0;
  bool show_skill = true;
};

// HTTP server with a websocket endpoint at /ws speaking the play protocol and
// static files under every other GET path. All sessions run on one I/O
// thread; each session is driven by its own fixed-rate timer.
class PlayServer {
 public:
  explicit PlayServer(ServerConfig config);
  ~PlayServer();
  PlayServer(const PlayServer&) = delete;
  PlayServer& operator=(const PlayServer&) = delete;

  // Binds and starts serving on a background thread. Returns the bound port.
  unsigned short start();
  // Binds and serves on the calling thread until stop().
  void run();
  void stop();
  unsigned short port() const;

  // Trajectory files written for finished sessions so far.
  std::vector<std::filesystem::path> exported() const;

  struct Impl;  // opaque; defined in server.cpp

 private:
  std::unique_ptr<Impl> impl_;
};

// Content type for a static file, from its extension.
std::string mime_type(const std::filesystem::path& path);

// Maps a request target to a file under `root`, or returns an empty path
// when the target escapes the root or is malformed. "/" maps to index.html.
std::filesystem::path resolve_static_path(const std::filesystem::path& root, std::string_view target);

}  // namespace iad::play
