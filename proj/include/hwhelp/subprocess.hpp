#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace hwhelp {

struct ProcessOptions {
  std::filesystem::path working_dir;
  std::chrono::milliseconds timeout{2000};
  /// Bytes of stdout kept; the process is killed once it writes more.
  std::size_t stdout_limit = 64 * 1024;
  std::size_t stderr_limit = 64 * 1024;
};

struct ProcessResult {
  int exit_code = -1;
  int term_signal = 0;
  bool timed_out = false;
  bool stdout_overflow = false;
  std::string out;
  std::string err;
  std::chrono::milliseconds elapsed{0};

  bool succeeded() const { return !timed_out && !stdout_overflow && term_signal == 0 && exit_code == 0; }
};

/// Runs argv[0] (PATH lookup) in its own process group. Throws
/// RunnerUnavailable when the program cannot be executed at all.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options);

/// Owns a fresh private directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path write(const std::string& name, const std::string& contents) const;

 private:
  std::filesystem::path path_;
};

/// Substitutes `{file}` in each argument.
std::vector<std::string> expand_command(const std::vector<std::string>& command, const std::string& file);

}  // namespace hwhelp
