#pragma once

// External equivalence judge speaking a line protocol over a child process's
// stdin/stdout. Each request is one line "Q\tA\tB"; each reply is one line,
// "YES" or "NO". Tabs and newlines inside fields are sent as spaces.

#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "empo/semantic_cluster.hpp"

namespace empo {

class SubprocessJudge {
 public:
  explicit SubprocessJudge(std::string command) : command_(std::move(command)) {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) throw JudgeError("judge: pipe failed");
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw JudgeError("judge: pipe failed");
    }
    pid_ = ::fork();
    if (pid_ < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      throw JudgeError("judge: fork failed");
    }
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    to_ = ::fdopen(to_child[1], "w");
    from_ = ::fdopen(from_child[0], "r");
    if (!to_ || !from_) {
      shutdown();
      throw JudgeError("judge: fdopen failed");
    }
  }

  SubprocessJudge(const SubprocessJudge&) = delete;
  SubprocessJudge& operator=(const SubprocessJudge&) = delete;

  ~SubprocessJudge() { shutdown(); }

  const std::string& command() const noexcept { return command_; }

  /// One request/reply round trip. Throws JudgeError on a closed pipe or an
  /// unrecognized reply.
  bool query(const std::string& question, const std::string& a,
             const std::string& b) {
    std::lock_guard lock(mutex_);
    if (!to_ || !from_) throw JudgeError("judge: process not running");
    std::string line = sanitize(question);
    line.push_back('\t');
    line += sanitize(a);
    line.push_back('\t');
    line += sanitize(b);
    line.push_back('\n');
    // The child may have exited; a broken pipe must surface as an error.
    struct sigaction ignore {}, previous {};
    ignore.sa_handler = SIG_IGN;
    ::sigaction(SIGPIPE, &ignore, &previous);
    bool wrote = std::fwrite(line.data(), 1, line.size(), to_) == line.size() &&
                 std::fflush(to_) == 0;
    ::sigaction(SIGPIPE, &previous, nullptr);
    if (!wrote) throw JudgeError("judge: write to '" + command_ + "' failed");

    std::string reply;
    int c;
    while ((c = std::fgetc(from_)) != EOF && c != '\n') reply.push_back(static_cast<char>(c));
    if (c == EOF && reply.empty()) {
      throw JudgeError("judge: '" + command_ + "' closed its output");
    }
    while (!reply.empty() && (reply.back() == '\r' || reply.back() == ' ')) reply.pop_back();
    std::size_t start = reply.find_first_not_of(' ');
    reply = start == std::string::npos ? std::string() : reply.substr(start);
    if (reply == "YES") return true;
    if (reply == "NO") return false;
    throw JudgeError("judge: invalid reply '" + reply + "'");
  }

  /// Wraps a shared judge process as an EquivalenceJudge callable.
  static EquivalenceJudge make_judge(std::shared_ptr<SubprocessJudge> proc,
                                     std::shared_ptr<JudgeCache> cache =
                                         std::make_shared<JudgeCache>()) {
    return EquivalenceJudge::external(
        [proc](const std::string& q, const std::string& a, const std::string& b) {
          return proc->query(q, a, b);
        },
        std::move(cache));
  }

 private:
  static std::string sanitize(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
      if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    return out;
  }

  void shutdown() {
    if (to_) {
      std::fclose(to_);
      to_ = nullptr;
    }
    if (from_) {
      std::fclose(from_);
      from_ = nullptr;
    }
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  std::string command_;
  pid_t pid_ = -1;
  std::FILE* to_ = nullptr;
  std::FILE* from_ = nullptr;
  std::mutex mutex_;
};

}  // namespace empo
