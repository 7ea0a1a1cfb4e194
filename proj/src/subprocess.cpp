#include "hwhelp/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "hwhelp/error.hpp"
#include "hwhelp/text.hpp"

namespace hwhelp {

namespace {

struct Pipe {
  int fds[2] = {-1, -1};
  Pipe() {
    if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  void close_read() {
    if (fds[0] >= 0) ::close(fds[0]);
    fds[0] = -1;
  }
  void close_write() {
    if (fds[1] >= 0) ::close(fds[1]);
    fds[1] = -1;
  }
};

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options) {
  if (argv.empty()) throw RunnerUnavailable("empty command");

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  const std::string cwd = options.working_dir.string();

  Pipe out, err, exec_status;
  const auto started = std::chrono::steady_clock::now();

  pid_t pid = ::fork();
  if (pid < 0) throw Error(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    // Child: only async-signal-safe calls until exec.
    ::setpgid(0, 0);
    ::dup2(out.fds[1], STDOUT_FILENO);
    ::dup2(err.fds[1], STDERR_FILENO);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) {
      int e = errno;
      (void)!::write(exec_status.fds[1], &e, sizeof e);
      ::_exit(127);
    }
    ::execvp(cargv[0], cargv.data());
    int e = errno;
    (void)!::write(exec_status.fds[1], &e, sizeof e);
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  out.close_write();
  err.close_write();
  exec_status.close_write();

  int exec_errno = 0;
  ssize_t got = ::read(exec_status.fds[0], &exec_errno, sizeof exec_errno);
  if (got == static_cast<ssize_t>(sizeof exec_errno)) {
    ::waitpid(pid, nullptr, 0);
    throw RunnerUnavailable("cannot execute '" + argv[0] + "': " + std::strerror(exec_errno));
  }

  ProcessResult result;
  const auto deadline = started + options.timeout;
  std::array<pollfd, 2> fds{pollfd{out.fds[0], POLLIN, 0}, pollfd{err.fds[0], POLLIN, 0}};
  std::array<char, 8192> buf{};
  bool killed = false;

  auto kill_group = [&] {
    if (!killed) ::kill(-pid, SIGKILL);
    killed = true;
  };

  while (fds[0].fd >= 0 || fds[1].fd >= 0) {
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      result.timed_out = true;
      kill_group();
      break;
    }
    int wait_ms = static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count()) + 1;
    int rc = ::poll(fds.data(), fds.size(), wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].fd < 0 || fds[i].revents == 0) continue;
      ssize_t n = ::read(fds[i].fd, buf.data(), buf.size());
      if (n <= 0) {
        fds[i].fd = -1;
        continue;
      }
      std::string& sink = i == 0 ? result.out : result.err;
      std::size_t limit = i == 0 ? options.stdout_limit : options.stderr_limit;
      std::size_t room = sink.size() < limit ? limit - sink.size() : 0;
      sink.append(buf.data(), std::min<std::size_t>(room, static_cast<std::size_t>(n)));
      if (static_cast<std::size_t>(n) > room && i == 0) {
        result.stdout_overflow = true;
        kill_group();
        fds[0].fd = -1;
        fds[1].fd = -1;
      }
    }
  }

  int status = 0;
  if (result.timed_out || result.stdout_overflow) kill_group();
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  // Reap anything the child left behind in its group.
  ::kill(-pid, SIGKILL);
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) result.term_signal = WTERMSIG(status);
  result.elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  return result;
}

TempDir::TempDir() {
  std::string pattern = (std::filesystem::temp_directory_path() / "hwhelp-XXXXXX").string();
  if (::mkdtemp(pattern.data()) == nullptr) throw Error(std::string("mkdtemp: ") + std::strerror(errno));
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::filesystem::path TempDir::write(const std::string& name, const std::string& contents) const {
  auto p = path_ / name;
  std::ofstream f(p, std::ios::binary);
  f << contents;
  if (!f) throw Error("cannot write " + p.string());
  return p;
}

std::vector<std::string> expand_command(const std::vector<std::string>& command, const std::string& file) {
  std::vector<std::string> out;
  out.reserve(command.size());
  for (const auto& arg : command) out.push_back(text::replace_all(arg, "{file}", file));
  return out;
}

}  // namespace hwhelp
