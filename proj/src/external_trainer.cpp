#include "augmentor/external_trainer.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <thread>

#include "augmentor/error.hpp"

namespace augmentor {

using nlohmann::json;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

ordered_json to_json(const AdapterTrainingConfig& cfg) {
  ordered_json j;
  j["learning_rate"] = cfg.learning_rate;
  j["patience"] = cfg.patience;
  j["max_epochs"] = cfg.max_epochs;
  j["seed"] = cfg.seed;
  j["stopping_metric"] = cfg.stopping_metric;
  return j;
}

std::vector<std::string> split_command_line(std::string_view cmd) {
  std::vector<std::string> out;
  std::string cur;
  bool have = false;
  char quote = 0;
  for (char c : cmd) {
    if (quote) {
      if (c == quote) quote = 0;
      else cur.push_back(c);
    } else if (c == '"' || c == '\'') {
      quote = c;
      have = true;
    } else if (c == ' ' || c == '\t' || c == '\n') {
      if (have) out.push_back(std::move(cur));
      cur.clear();
      have = false;
    } else {
      cur.push_back(c);
      have = true;
    }
  }
  if (quote) throw PreconditionError("InvalidConfig", "unbalanced quote in adapter command");
  if (have) out.push_back(std::move(cur));
  return out;
}

ExternalTrainer::ExternalTrainer(AdapterOptions options) : options_(std::move(options)) {
  if (options_.argv.empty()) throw PreconditionError("InvalidConfig", "empty adapter command");

  std::vector<char*> argv;
  for (auto& a : options_.argv) argv.push_back(a.data());
  argv.push_back(nullptr);

  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw ExternalError("AdapterCrashed", std::string("socketpair: ") + std::strerror(errno));
  }
  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw ExternalError("AdapterCrashed", std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    // dup2 clears CLOEXEC on the new descriptors.
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execvp(argv[0], argv.data());
    ::_exit(127);
  }
  ::close(sv[1]);
  pid_ = pid;
  fd_ = sv[0];
}

ExternalTrainer::~ExternalTrainer() {
  if (pid_ > 0 && !exit_code_) {
    kill_child();
  }
  if (fd_ >= 0) ::close(fd_);
}

void ExternalTrainer::kill_child() {
  if (pid_ <= 0 || exit_code_) return;
  ::kill(pid_, SIGKILL);
  wait_child();
}

int ExternalTrainer::wait_child() {
  if (exit_code_) return *exit_code_;
  int status = 0;
  while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
  }
  exit_code_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return *exit_code_;
}

std::string ExternalTrainer::read_line() {
  auto deadline = Clock::now() + options_.timeout;
  for (;;) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (remaining <= 0) {
      kill_child();
      throw ExternalError("Timeout", "adapter gave no reply within " +
                                         std::to_string(options_.timeout.count()) + " ms");
    }
    pollfd pfd{fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 1 << 30)));
    if (rc < 0 && errno == EINTR) continue;
    if (rc == 0) continue;
    char chunk[65536];
    ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      int code = wait_child();
      throw ExternalError("AdapterCrashed", "adapter exited with code " + std::to_string(code) +
                                                " before replying");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

json ExternalTrainer::exchange(const std::string& line, const char* probs_key,
                               std::size_t expected) {
  if (exit_code_) throw ExternalError("AdapterCrashed", "adapter already exited");
  std::string payload = line + "\n";
  std::size_t sent = 0;
  while (sent < payload.size()) {
    ssize_t n = ::send(fd_, payload.data() + sent, payload.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) {
      int code = wait_child();
      throw ExternalError("AdapterCrashed", "adapter exited with code " + std::to_string(code));
    }
    sent += static_cast<std::size_t>(n);
  }

  std::string reply = read_line();
  auto protocol_error = [&](const std::string& why) {
    throw ExternalError("ProtocolError", why + ": " + reply.substr(0, 200));
  };
  json j = json::parse(reply, nullptr, false);
  if (j.is_discarded() || !j.is_object()) protocol_error("reply is not a JSON object");
  if (j.value("status", "") != "ok") protocol_error("status is not ok");
  auto it = j.find(probs_key);
  if (it == j.end() || !it->is_array()) protocol_error(std::string("missing array ") + probs_key);
  if (it->size() != expected) {
    protocol_error("expected " + std::to_string(expected) + " probabilities, got " +
                   std::to_string(it->size()));
  }
  for (const auto& p : *it) {
    if (!p.is_number() || !std::isfinite(p.get<double>()) || p.get<double>() < 0.0 ||
        p.get<double>() > 1.0) {
      protocol_error("probabilities must be numbers in [0, 1]");
    }
  }
  return *it;
}

namespace {

ordered_json samples_json(const Pool& pool) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : pool) {
    arr.push_back(ordered_json{{"id", r.id}, {"text", r.text}, {"label", r.label}});
  }
  return arr;
}

}  // namespace

std::vector<double> ExternalTrainer::train(const Pool& train, const Pool& valid) {
  ordered_json msg;
  msg["cmd"] = "train";
  msg["train"] = samples_json(train);
  msg["valid"] = samples_json(valid);
  msg["config"] = to_json(options_.config);
  auto probs = exchange(msg.dump(-1, ' ', false, json::error_handler_t::replace), "valid_probs",
                        valid.size());
  return probs.get<std::vector<double>>();
}

std::vector<double> ExternalTrainer::predict(const std::vector<std::string>& texts) {
  ordered_json msg;
  msg["cmd"] = "predict";
  msg["texts"] = texts;
  auto probs =
      exchange(msg.dump(-1, ' ', false, json::error_handler_t::replace), "probs", texts.size());
  return probs.get<std::vector<double>>();
}

int ExternalTrainer::finish() {
  if (exit_code_) return *exit_code_;
  ::shutdown(fd_, SHUT_WR);
  auto deadline = Clock::now() + std::chrono::seconds(10);
  while (Clock::now() < deadline) {
    int status = 0;
    pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      exit_code_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
      return *exit_code_;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  kill_child();
  return *exit_code_;
}

std::vector<double> external_trainer_roundtrip(const AdapterOptions& options, const Pool& train,
                                               const Pool& valid) {
  ExternalTrainer trainer(options);
  auto probs = trainer.train(train, valid);
  trainer.finish();
  return probs;
}

}  // namespace augmentor
