// Stand-in for the external runner. Speaks optira-runner/1 on stdin/stdout
// and solves with the internal solver unless the script carries a
// "#fake: <directive>" line:
//   sleep <s>          sleep before answering
//   crash              abort()
//   garbage            reply with a non-JSON line
//   silent-exit        exit 3 without a reply
//   error <class>      reply status=error with that class
//   infeasible         reply status=infeasible
//   wrong-dimension    reply with one extra coordinate
//   canary <path>      try to create <path>, then solve; the reply notes the result
//   env                list the environment in the reply
//   connect <port>     try a TCP connect to 127.0.0.1:<port>
//   hog                allocate until the address-space limit bites
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "optira/sandbox.hpp"

extern char** environ;

using nlohmann::json;

namespace {

void reply(const json& doc) {
  std::cout << doc.dump() << "\n" << std::flush;
}

std::vector<std::vector<std::string>> directives(const std::string& script) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(script);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("#fake:", 0) != 0) continue;
    std::istringstream words(line.substr(6));
    std::vector<std::string> w;
    for (std::string x; words >> x;) w.push_back(x);
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

}  // namespace

int main() {
  std::string line;
  if (!std::getline(std::cin, line)) {
    reply({{"status", "error"}, {"error", {{"class", "schema"}, {"message", "empty request"}}}});
    return 0;
  }
  json req = json::parse(line, nullptr, false);
  if (req.is_discarded() || !req.is_object() || req.value("protocol", "") != optira::kRunnerProtocol) {
    reply({{"status", "error"}, {"error", {{"class", "schema"}, {"message", "bad request"}}}});
    return 0;
  }
  json diagnostics = json::object();
  bool extra = false;
  for (const auto& d : directives(req.value("script", ""))) {
    const std::string& what = d[0];
    if (what == "sleep" && d.size() > 1) {
      std::this_thread::sleep_for(std::chrono::duration<double>(std::stod(d[1])));
    } else if (what == "crash") {
      std::abort();
    } else if (what == "garbage") {
      std::cout << "this is not json\n" << std::flush;
      return 0;
    } else if (what == "silent-exit") {
      return 3;
    } else if (what == "error") {
      reply({{"status", "error"},
             {"error", {{"class", d.size() > 1 ? d[1] : "crash"}, {"message", "scripted failure"}}}});
      return 0;
    } else if (what == "infeasible") {
      reply({{"status", "infeasible"}});
      return 0;
    } else if (what == "wrong-dimension") {
      extra = true;
    } else if (what == "canary" && d.size() > 1) {
      std::ofstream f(d[1]);
      f << "escaped\n";
      diagnostics["canary"] = f.good() ? "written" : "denied";
      std::ofstream inside("inside.txt");
      inside << "ok\n";
      diagnostics["scratch_write"] = inside.good() ? "written" : "denied";
    } else if (what == "env") {
      json vars = json::array();
      for (char** e = environ; *e; ++e) vars.push_back(std::string(*e).substr(0, std::string(*e).find('=')));
      diagnostics["env"] = vars;
      char cwd[4096];
      diagnostics["cwd"] = getcwd(cwd, sizeof cwd) ? cwd : "";
    } else if (what == "connect" && d.size() > 1) {
      const int fd = socket(AF_INET, SOCK_STREAM, 0);
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_port = htons(static_cast<uint16_t>(std::stoi(d[1])));
      addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
      diagnostics["connect"] = connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0 ? "connected" : "refused";
      close(fd);
    } else if (what == "hog") {
      std::vector<char*> blocks;
      for (int i = 0; i < 4096; ++i) {
        char* b = static_cast<char*>(std::malloc(std::size_t{1} << 20));
        if (!b) break;
        for (std::size_t k = 0; k < (std::size_t{1} << 20); k += 4096) b[k] = 1;
        blocks.push_back(b);
      }
      diagnostics["hog_mib"] = blocks.size();
    }
  }

  optira::SolverOptions opts;
  const json o = req.value("options", json::object());
  opts.tolerance = o.value("tolerance", opts.tolerance);
  opts.max_inner = o.value("max_inner", opts.max_inner);
  opts.max_outer = o.value("max_outer", opts.max_outer);
  try {
    const optira::Solution s = optira::solve_document(req.at("model"), nullptr, opts);
    json x = std::vector<double>(s.x_star.data(), s.x_star.data() + s.x_star.size());
    if (extra) x.push_back(0.0);
    reply({{"status", s.status == optira::SolveStatus::Optimal ? "optimal" : "max-iter"},
           {"x_star", x},
           {"objective", s.objective},
           {"kkt", {{"stationarity", s.kkt.stationarity}, {"primal", s.kkt.primal},
                    {"complementarity", s.kkt.complementarity}}},
           {"iterations", s.iterations},
           {"diagnostics", diagnostics}});
  } catch (const optira::ScriptError& e) {
    reply({{"status", "error"},
           {"error", {{"class", std::string(optira::to_string(e.error_class()))}, {"message", e.what()}}},
           {"diagnostics", diagnostics}});
  }
  return 0;
}
