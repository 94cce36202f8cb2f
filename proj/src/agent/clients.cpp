#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lbac/agent.hpp"

namespace lbac {

namespace {

std::vector<std::string> string_list(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": `attempts` must be an array of strings");
  std::vector<std::string> out;
  for (const auto& s : j) {
    if (!s.is_string()) throw ConfigError(where + ": `attempts` must be an array of strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

[[noreturn]] void client_failure(const std::string& what) {
  throw AgentError(AgentError::Kind::ClientFailure, what);
}

}  // namespace

std::shared_ptr<ScriptedClient> ScriptedClient::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("scripted fixture must be a JSON object");
  auto c = std::make_shared<ScriptedClient>();
  if (j.contains("attempts")) c->calls_["0"] = string_list(j.at("attempts"), "scripted fixture");
  if (j.contains("calls")) {
    for (const auto& [path, call] : j.at("calls").items()) {
      if (!call.is_object() || !call.contains("attempts")) {
        throw ConfigError("scripted fixture: call `" + path + "` needs `attempts`");
      }
      c->calls_[path] = string_list(call.at("attempts"), "call " + path);
    }
  }
  if (j.contains("hijack")) {
    for (const auto& h : j.at("hijack")) {
      Hijack rule;
      if (!h.contains("when_prompt_contains") || !h.contains("attempts") || !h.at("attempts").is_object()) {
        throw ConfigError("scripted fixture: hijack rules need `when_prompt_contains` and `attempts`");
      }
      rule.trigger = h.at("when_prompt_contains").get<std::string>();
      for (const auto& [key, list] : h.at("attempts").items()) rule.attempts[key] = string_list(list, "hijack " + key);
      c->hijacks_.push_back(std::move(rule));
    }
  }
  return c;
}

std::shared_ptr<ScriptedClient> ScriptedClient::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scripted fixture " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed scripted fixture " + path + ": " + e.what());
  }
}

std::string ScriptedClient::target_key(const AgentRequest& r) {
  return (r.target_effect.empty() ? "pure " : "effect ") + r.target_result;
}

std::string ScriptedClient::complete(const AgentRequest& r) {
  auto pick = [&](const std::vector<std::string>& list, const std::string& what) {
    if (r.attempt < 0 || static_cast<std::size_t>(r.attempt) >= list.size()) {
      client_failure("scripted client has no attempt " + std::to_string(r.attempt) + " for " + what);
    }
    return list[static_cast<std::size_t>(r.attempt)];
  };
  for (const auto& h : hijacks_) {
    if (r.user_prompt.find(h.trigger) == std::string::npos) continue;
    auto it = h.attempts.find(target_key(r));
    if (it != h.attempts.end()) return pick(it->second, "hijacked call " + r.call_path);
  }
  auto it = calls_.find(r.call_path);
  if (it == calls_.end()) client_failure("scripted client has no script for call " + r.call_path);
  return pick(it->second, "call " + r.call_path);
}

// ---------------------------------------------------------------------------

HttpClient::HttpClient(ClientConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw ConfigError("llm.endpoint is not set");
  auto scheme = cfg_.endpoint.find("://");
  if (scheme == std::string::npos) throw ConfigError("llm.endpoint must start with http:// or https://");
  auto slash = cfg_.endpoint.find('/', scheme + 3);
  origin_ = cfg_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
  if (!cfg_.api_key_env.empty() && !std::getenv(cfg_.api_key_env.c_str())) {
    throw ConfigError("environment variable " + cfg_.api_key_env + " named by llm.api_key_env is not set");
  }
}

std::string HttpClient::complete(const AgentRequest& r) {
  httplib::Client cli(origin_);
  cli.set_connection_timeout(10);
  cli.set_read_timeout(300);
  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (key) headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  nlohmann::json body = {{"messages",
                          {{{"role", "system"}, {"content", r.system}}, {{"role", "user"}, {"content", r.user_message()}}}}};
  if (!cfg_.model.empty()) body["model"] = cfg_.model;
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res) client_failure("request to " + cfg_.endpoint + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) client_failure("endpoint returned HTTP " + std::to_string(res->status));
  try {
    auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    client_failure(std::string("unexpected response from endpoint: ") + e.what());
  }
}

std::shared_ptr<LlmClient> http_client_from_config(const Config& cfg) {
  return std::make_shared<HttpClient>(cfg.client);
}

// ---------------------------------------------------------------------------

std::string RecordingClient::complete(const AgentRequest& r) {
  std::string reply = inner_->complete(r);
  std::lock_guard lock(mu_);
  auto& list = calls_[r.call_path];
  if (list.size() <= static_cast<std::size_t>(r.attempt)) list.resize(static_cast<std::size_t>(r.attempt) + 1);
  list[static_cast<std::size_t>(r.attempt)] = reply;
  return reply;
}

nlohmann::json RecordingClient::fixture() const {
  std::lock_guard lock(mu_);
  nlohmann::json calls = nlohmann::json::object();
  for (const auto& [path, list] : calls_) calls[path] = {{"attempts", list}};
  return {{"calls", calls}};
}

// ---------------------------------------------------------------------------

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    auto integer = [&] {
      try {
        std::size_t used = 0;
        int v = std::stoi(value, &used);
        if (used != value.size() || v < 0) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(lineno) + ": `" + key + "` needs a non-negative integer");
      }
    };
    if (key == "llm.endpoint") {
      cfg.client.endpoint = value;
    } else if (key == "llm.model") {
      cfg.client.model = value;
    } else if (key == "llm.api_key_env") {
      cfg.client.api_key_env = value;
    } else if (key == "agent.retry_budget") {
      cfg.agent.retry_budget = integer();
    } else if (key == "agent.max_depth") {
      cfg.agent.max_depth = integer();
    } else if (key == "agent.retry_on_exec_error") {
      if (value == "true") {
        cfg.agent.retry_on_exec_error = true;
      } else if (value == "false") {
        cfg.agent.retry_on_exec_error = false;
      } else {
        throw ConfigError("config line " + std::to_string(lineno) + ": `" + key + "` must be true or false");
      }
    } else {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key `" + key + "`");
    }
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace lbac
