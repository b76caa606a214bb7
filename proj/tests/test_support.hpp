#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "hqs/config.hpp"
#include "hqs/synthetic.hpp"

namespace hqs::testing {

namespace fs = std::filesystem;

inline fs::path data_dir() { return HQS_TEST_DATA; }
inline fs::path cli_path() { return HQS_CLI_PATH; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "hqs-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

// The full-size surrogate corpus (both datasets plus configs). Normally made
// by the ctest fixture; generated here when a binary runs on its own.
inline const fs::path& surrogate_dir() {
  static const fs::path dir = [] {
    fs::path d = HQS_TEST_SURROGATE;
    if (!fs::exists(d / "combined.conf")) {
      const std::string cmd = cli_path().string() + " -q make-surrogate --out " + d.string() + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) throw std::runtime_error("surrogate generation failed");
    }
    return d;
  }();
  return dir;
}

inline harness::RunConfig surrogate_config(const std::string& dataset) {
  return harness::RunConfig::load(surrogate_dir() / (dataset + ".conf"));
}

struct CommandResult {
  int status = 0;
  std::string out;
  std::string err;
};

// Runs the CLI with `args` (already shell-quoted), capturing both streams.
inline CommandResult run_cli(const std::string& args) {
  TempDir tmp;
  const std::string cmd = cli_path().string() + " " + args + " > " + (tmp / "out").string() + " 2> " +
                          (tmp / "err").string();
  const int raw = std::system(cmd.c_str());
  CommandResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_file(tmp / "out");
  r.err = read_file(tmp / "err");
  return r;
}

}  // namespace hqs::testing
