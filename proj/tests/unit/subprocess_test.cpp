#include <gtest/gtest.h>

#include "hwhelp/error.hpp"
#include "hwhelp/subprocess.hpp"

using namespace hwhelp;
using namespace std::chrono_literals;

TEST(Subprocess, CapturesOutputAndExitCode) {
  auto r = run_process({"sh", "-c", "echo out; echo err >&2; exit 3"}, {});
  EXPECT_EQ(r.out, "out\n");
  EXPECT_EQ(r.err, "err\n");
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_FALSE(r.succeeded());
}

TEST(Subprocess, TimeoutKillsProcessGroup) {
  ProcessOptions opts;
  opts.timeout = 200ms;
  auto r = run_process({"sh", "-c", "sleep 5 & sleep 5"}, opts);
  EXPECT_TRUE(r.timed_out);
  EXPECT_LT(r.elapsed, 2000ms);
}

TEST(Subprocess, StdoutLimit) {
  ProcessOptions opts;
  opts.stdout_limit = 1000;
  auto r = run_process({"sh", "-c", "yes x | head -c 100000"}, opts);
  EXPECT_TRUE(r.stdout_overflow);
  EXPECT_LE(r.out.size(), 1000u);
}

TEST(Subprocess, MissingProgram) {
  EXPECT_THROW(run_process({"definitely-not-a-program-xyz"}, {}), RunnerUnavailable);
}

TEST(Subprocess, TempDirLifecycle) {
  std::filesystem::path p;
  {
    TempDir d;
    p = d.path();
    auto f = d.write("a.txt", "hi");
    EXPECT_TRUE(std::filesystem::exists(f));
    auto r = run_process({"cat", "a.txt"}, {.working_dir = d.path()});
    EXPECT_EQ(r.out, "hi");
  }
  EXPECT_FALSE(std::filesystem::exists(p));
}

TEST(Subprocess, ExpandCommand) {
  EXPECT_EQ(expand_command({"python3", "{file}", "--x={file}"}, "/t/s.py"),
            (std::vector<std::string>{"python3", "/t/s.py", "--x=/t/s.py"}));
}
