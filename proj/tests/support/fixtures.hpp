#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "swag/backends.hpp"
#include "swag/cli.hpp"
#include "swag/core.hpp"

namespace swag::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("swag-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

inline CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Directory holding the desk-run fixtures (prompts, config, scripts).
inline std::filesystem::path desk_dir() { return std::filesystem::path(SWAG_TEST_DATA_DIR) / "desk"; }

/// Last user message of a request.
inline const std::string& last_user(const GenerationRequest& r) { return r.messages.back().content; }

/// Story backend whose reply depends only on the request, never on call order.
inline std::shared_ptr<ScriptedBackend> echo_story_backend() {
  return ScriptedBackend::rules({}, ScriptedReply::ok("Paragraph {fp8}."), "story");
}

}  // namespace swag::testing

/// Asserts that `stmt` throws swag::Error with the given code.
#define EXPECT_ERRC(stmt, errc)                                              \
  do {                                                                       \
    try {                                                                    \
      static_cast<void>(stmt);                                               \
      ADD_FAILURE() << "expected " << ::swag::to_string(errc) << " from " #stmt; \
    } catch (const ::swag::Error& e) {                                       \
      EXPECT_EQ(e.code(), errc) << e.what();                                 \
    }                                                                        \
  } while (0)
