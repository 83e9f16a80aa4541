// Minimal external trainer for exercising the adapter protocol.
//
//   stub_adapter --mode uniform|oracle|malformed|crash|hang|error
//
// uniform   every probability is 0.5
// oracle    validation probabilities are the validation labels
// malformed replies with a line that is not JSON
// crash     exits with status 4 without replying
// hang      never replies
// error     replies {"status":"error"}

#include <chrono>
#include <cstring>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

using nlohmann::json;

int main(int argc, char** argv) {
  std::string mode = "uniform";
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--mode") == 0) mode = argv[i + 1];
  }

  std::string line;
  while (std::getline(std::cin, line)) {
    json msg = json::parse(line, nullptr, false);
    if (msg.is_discarded()) return 5;
    if (mode == "crash") return 4;
    if (mode == "hang") {
      for (;;) std::this_thread::sleep_for(std::chrono::seconds(1));
    }
    if (mode == "malformed") {
      std::cout << "this is not json" << std::endl;
      continue;
    }
    if (mode == "error") {
      std::cout << R"({"status":"error","message":"stub failure"})" << std::endl;
      continue;
    }

    json reply = {{"status", "ok"}};
    const std::string cmd = msg.value("cmd", "");
    if (cmd == "train") {
      json probs = json::array();
      for (const auto& v : msg.at("valid")) {
        probs.push_back(mode == "oracle" ? v.at("label").get<double>() : 0.5);
      }
      reply["valid_probs"] = probs;
    } else if (cmd == "predict") {
      reply["probs"] = json::array();
      for (std::size_t i = 0; i < msg.at("texts").size(); ++i) reply["probs"].push_back(0.5);
    } else {
      reply = {{"status", "error"}, {"message", "unknown cmd"}};
    }
    std::cout << reply.dump() << std::endl;
  }
  return 0;
}
