#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lbac/library.hpp"

namespace lbac {

class AgentError : public Error {
 public:
  enum class Kind { RetriesExhausted, DepthExceeded, ClientFailure };

  AgentError(Kind kind, const std::string& what, std::string last_error = {})
      : Error(what), kind_(kind), last_error_(std::move(last_error)) {}
  Kind kind() const { return kind_; }
  /// Rendered error of the final rejected attempt (RetriesExhausted only).
  const std::string& last_error() const { return last_error_; }

 private:
  Kind kind_;
  std::string last_error_;
};

std::string to_string(AgentError::Kind k);

/// One generation request handed to a client.
struct AgentRequest {
  std::string system;
  std::string defs_rendering;
  std::string target_type_rendering;
  std::string user_prompt;
  std::vector<std::string> prior_errors;

  /// Position of the agent call in the session tree: "0", "0.1", ...
  std::string call_path;
  int attempt = 0;
  /// Effect of the target ("" for pure targets) and its result type.
  std::string target_effect;
  std::string target_result;

  /// Everything after the system part, as one user message.
  std::string user_message() const;
  /// system + user message.
  std::string render() const;
};

struct Attempt {
  enum class Outcome { ParseError, TypeError, ExecError, Success };
  std::string program;
  Outcome outcome;
  std::string error;
};

std::string to_string(Attempt::Outcome o);

struct AgentSession {
  std::shared_ptr<const Defs> defs;
  std::string prompt;
  TypeP target;
  std::vector<Attempt> attempts;
  int retry_budget = 3;
  int depth = 0;
};

/// Default system template (assets/system_prompt.md).
const std::string& default_system_prompt();

/// "name :: type -- doc" lines sorted by name.
std::string render_defs(const Defs& defs);
/// Rejected attempts are fed back newest last, at most the last three.
AgentRequest render_request(const AgentSession& session, const std::string& system);

/// Largest fenced code block of `reply`, or the whole reply.
std::string extract_program(const std::string& reply);

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  /// Returns raw model output; throws AgentError(ClientFailure).
  virtual std::string complete(const AgentRequest& request) = 0;
};

/// Replays fixture programs. Fixture forms:
///   {"attempts": [...]}                          call path "0"
///   {"calls": {"0": {"attempts": [...]}, ...}}
/// plus optional hijack rules that stand in for a compromised model:
///   {"hijack": [{"when_prompt_contains": s, "attempts": {key: [...]}}]}
/// where key is "pure <result>" or "effect <result>".
class ScriptedClient : public LlmClient {
 public:
  struct Hijack {
    std::string trigger;
    std::map<std::string, std::vector<std::string>> attempts;
  };

  static std::shared_ptr<ScriptedClient> load(const std::string& path);
  static std::shared_ptr<ScriptedClient> from_json(const nlohmann::json& j);

  std::string complete(const AgentRequest& request) override;
  void add_hijack(Hijack h) { hijacks_.push_back(std::move(h)); }
  static std::string target_key(const AgentRequest& request);

 private:
  std::map<std::string, std::vector<std::string>> calls_;
  std::vector<Hijack> hijacks_;
};

struct ClientConfig {
  std::string endpoint;
  std::string model;
  std::string api_key_env;
};

/// Chat-completion client over HTTP(S). Safe to share between sessions.
class HttpClient : public LlmClient {
 public:
  explicit HttpClient(ClientConfig cfg);
  std::string complete(const AgentRequest& request) override;

 private:
  ClientConfig cfg_;
  std::string origin_;
  std::string path_;
};

/// Forwards to another client and records every reply as a scripted fixture.
class RecordingClient : public LlmClient {
 public:
  explicit RecordingClient(std::shared_ptr<LlmClient> inner) : inner_(std::move(inner)) {}
  std::string complete(const AgentRequest& request) override;
  nlohmann::json fixture() const;

 private:
  std::shared_ptr<LlmClient> inner_;
  mutable std::mutex mu_;
  std::map<std::string, std::vector<std::string>> calls_;
};

struct AgentOptions {
  int retry_budget = 3;
  int max_depth = 8;
  bool retry_on_exec_error = false;
  std::string system_prompt = default_system_prompt();
};

/// Key=value configuration file; `#` starts a comment.
struct Config {
  ClientConfig client;
  AgentOptions agent;

  static Config load(const std::string& path);
  static Config parse(const std::string& text);
};

std::shared_ptr<LlmClient> http_client_from_config(const Config& cfg);

/// The `agent` primitive's runtime: generate, check, retry, execute.
/// Not thread-safe; use one runtime per session tree.
class AgentRuntime : public AgentHost {
 public:
  AgentRuntime(std::shared_ptr<const Library> lib, std::shared_ptr<LlmClient> client, AgentOptions opts = {});

  Value run_agent(Interp& interp, EffectContext* ctx, const Value& defs, const std::string& prompt,
                  const TypeP& target) override;

  /// Top-level session. Effectful targets run under `ctx`.
  Value run_session(Interp& interp, EffectContext* ctx, std::shared_ptr<const Defs> defs,
                    const std::string& prompt, const TypeP& target);

  /// Called with the certificate of every program right before it runs.
  std::function<void(const CheckCertificate&)> on_execute;

  /// One JSON object per attempt, in execution order.
  const std::vector<nlohmann::json>& transcript() const { return transcript_; }
  std::string transcript_jsonl() const;
  const std::vector<AgentSession>& sessions() const { return sessions_; }

 private:
  struct Frame {
    std::string path;
    int children = 0;
  };

  Value session(Interp& interp, EffectContext* ctx, std::shared_ptr<const Defs> defs, const std::string& prompt,
                const TypeP& target);

  std::shared_ptr<const Library> lib_;
  std::shared_ptr<LlmClient> client_;
  AgentOptions opts_;
  std::vector<Frame> stack_;
  int top_level_ = 0;
  std::vector<nlohmann::json> transcript_;
  std::vector<AgentSession> sessions_;
};

}  // namespace lbac
