#include <algorithm>
#include <sstream>

#include "lbac/agent.hpp"
#include "system_prompt.inc"

namespace lbac {

std::string to_string(AgentError::Kind k) {
  switch (k) {
    case AgentError::Kind::RetriesExhausted: return "RetriesExhausted";
    case AgentError::Kind::DepthExceeded: return "DepthExceeded";
    case AgentError::Kind::ClientFailure: return "ClientFailure";
  }
  return "?";
}

std::string to_string(Attempt::Outcome o) {
  switch (o) {
    case Attempt::Outcome::ParseError: return "parse_error";
    case Attempt::Outcome::TypeError: return "type_error";
    case Attempt::Outcome::ExecError: return "exec_error";
    case Attempt::Outcome::Success: return "success";
  }
  return "?";
}

const std::string& default_system_prompt() {
  static const std::string text = kSystemPrompt;
  return text;
}

std::string render_defs(const Defs& defs) {
  std::vector<std::string> lines;
  for (const auto& e : defs.entries) {
    std::string line = e.name + " :: " + render_scheme(e.scheme);
    if (!e.doc.empty()) line += " -- " + e.doc;
    lines.push_back(std::move(line));
  }
  lines.push_back(defs.name + " :: Defs -- these definitions, for sub-agents");
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

AgentRequest render_request(const AgentSession& session, const std::string& system) {
  AgentRequest r;
  r.system = system;
  r.defs_rendering = render_defs(*session.defs);
  r.target_type_rendering = render_type(session.target);
  r.user_prompt = session.prompt;
  for (const auto& a : session.attempts) {
    if (a.outcome != Attempt::Outcome::Success) r.prior_errors.push_back(a.error);
  }
  if (r.prior_errors.size() > 3) r.prior_errors.erase(r.prior_errors.begin(), r.prior_errors.end() - 3);
  if (session.target->kind == Type::Kind::Effect) {
    r.target_effect = session.target->args[0]->name;
    r.target_result = render_type(session.target->args[1]);
  } else {
    r.target_result = r.target_type_rendering;
  }
  return r;
}

std::string AgentRequest::user_message() const {
  std::ostringstream os;
  os << "Available definitions:\n" << defs_rendering << "\n-- expected type: " << target_type_rendering
     << "\n\nTask:\n" << user_prompt << "\n";
  if (!prior_errors.empty()) {
    os << "\nPrevious attempts were rejected:\n";
    for (std::size_t i = 0; i < prior_errors.size(); ++i) os << (i + 1) << ". " << prior_errors[i] << "\n";
  }
  return os.str();
}

std::string AgentRequest::render() const { return system + "\n" + user_message(); }

std::string extract_program(const std::string& reply) {
  std::istringstream in(reply);
  std::string line, best, current;
  bool inside = false, found = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view trimmed(line);
    while (!trimmed.empty() && (trimmed.front() == ' ' || trimmed.front() == '\t')) trimmed.remove_prefix(1);
    if (trimmed.substr(0, 3) == "```") {
      if (inside) {
        if (!found || current.size() > best.size()) best = current;
        found = true;
        current.clear();
      }
      inside = !inside;
      continue;
    }
    if (inside) current += line + "\n";
  }
  if (!found) return reply;
  if (!best.empty() && best.back() == '\n') best.pop_back();
  return best;
}

// ---------------------------------------------------------------------------

AgentRuntime::AgentRuntime(std::shared_ptr<const Library> lib, std::shared_ptr<LlmClient> client, AgentOptions opts)
    : lib_(std::move(lib)), client_(std::move(client)), opts_(std::move(opts)) {}

Value AgentRuntime::run_agent(Interp& interp, EffectContext*, const Value& defs_value, const std::string& prompt,
                              const TypeP& target) {
  auto defs = defs_value.payload<DefsPayload>(kDefsTag).defs;
  if (target->kind == Type::Kind::Effect) {
    return make_host_thunk(target->args[0]->name, "agent",
                           [this, defs, prompt, target](Interp& in, EffectContext& ctx) {
                             return session(in, &ctx, defs, prompt, target);
                           });
  }
  return session(interp, nullptr, defs, prompt, target);
}

Value AgentRuntime::run_session(Interp& interp, EffectContext* ctx, std::shared_ptr<const Defs> defs,
                                const std::string& prompt, const TypeP& target) {
  if (target->kind == Type::Kind::Effect) {
    if (!ctx) throw ConfigError("an effectful agent target needs an effect context");
    return interp.run(make_host_thunk(target->args[0]->name, "agent",
                                      [&](Interp& in, EffectContext& c) {
                                        return session(in, &c, defs, prompt, target);
                                      }),
                      *ctx);
  }
  return session(interp, nullptr, defs, prompt, target);
}

std::string AgentRuntime::transcript_jsonl() const {
  std::string out;
  for (const auto& j : transcript_) out += j.dump() + "\n";
  return out;
}

Value AgentRuntime::session(Interp& interp, EffectContext* ctx, std::shared_ptr<const Defs> defs,
                            const std::string& prompt, const TypeP& target) {
  const std::string path =
      stack_.empty() ? std::to_string(top_level_++) : stack_.back().path + "." + std::to_string(stack_.back().children++);
  AgentSession s{defs, prompt, target, {}, opts_.retry_budget, static_cast<int>(stack_.size())};

  auto entry = [&](int attempt) {
    return nlohmann::json{{"call", path},
                          {"depth", s.depth},
                          {"attempt", attempt},
                          {"defs", defs->name},
                          {"target", render_type(target)},
                          {"context", ctx ? ctx->effect : std::string()},
                          {"prompt", prompt}};
  };
  struct Finish {
    AgentRuntime& rt;
    AgentSession& s;
    ~Finish() { rt.sessions_.push_back(s); }
  } finish{*this, s};

  if (s.depth >= opts_.max_depth) {
    auto j = entry(0);
    j["outcome"] = "depth_exceeded";
    transcript_.push_back(std::move(j));
    throw AgentError(AgentError::Kind::DepthExceeded,
                     "agent recursion exceeded the maximum depth of " + std::to_string(opts_.max_depth));
  }

  const TypeEnv tenv = lib_->type_env(*defs);
  const EnvP venv = lib_->value_env(*defs);
  for (int attempt = 0;; ++attempt) {
    AgentRequest req = render_request(s, opts_.system_prompt);
    req.call_path = path;
    req.attempt = attempt;
    std::string reply;
    try {
      reply = client_->complete(req);
    } catch (const AgentError& e) {
      auto j = entry(attempt);
      j["outcome"] = "client_failure";
      j["error"] = e.what();
      transcript_.push_back(std::move(j));
      throw;
    } catch (const std::exception& e) {
      auto j = entry(attempt);
      j["outcome"] = "client_failure";
      j["error"] = e.what();
      transcript_.push_back(std::move(j));
      throw AgentError(AgentError::Kind::ClientFailure, std::string("client failed: ") + e.what());
    }
    Attempt a{extract_program(reply), Attempt::Outcome::Success, {}};
    CertificateP cert;
    try {
      cert = check_against(tenv, lib_->parse(a.program), target);
    } catch (const ParseError& e) {
      a.outcome = Attempt::Outcome::ParseError;
      a.error = e.what();
    } catch (const TypeError& e) {
      a.outcome = Attempt::Outcome::TypeError;
      a.error = e.what();
    }

    auto j = entry(attempt);
    j["program"] = a.program;
    if (!cert) {
      j["outcome"] = to_string(a.outcome);
      j["error"] = a.error;
      transcript_.push_back(std::move(j));
      s.attempts.push_back(a);
      if (attempt >= opts_.retry_budget) {
        throw AgentError(AgentError::Kind::RetriesExhausted,
                         "no well-typed program after " + std::to_string(attempt + 1) + " attempts; last error: " +
                             a.error,
                         a.error);
      }
      continue;
    }

    const std::size_t slot = transcript_.size();
    j["outcome"] = "running";
    transcript_.push_back(std::move(j));
    if (on_execute) on_execute(*cert);
    try {
      struct Push {
        std::vector<Frame>& st;
        Push(std::vector<Frame>& s, const std::string& p) : st(s) { st.push_back(Frame{p, 0}); }
        ~Push() { st.pop_back(); }
      } push(stack_, path);
      Value v = eval_pure(interp, cert, venv);
      if (ctx) v = interp.run(v, *ctx);
      transcript_[slot]["outcome"] = "success";
      s.attempts.push_back(a);
      return v;
    } catch (const Error& e) {
      a.outcome = Attempt::Outcome::ExecError;
      a.error = e.what();
      transcript_[slot]["outcome"] = "exec_error";
      transcript_[slot]["error"] = a.error;
      s.attempts.push_back(a);
      if (!opts_.retry_on_exec_error || attempt >= opts_.retry_budget) throw;
    }
  }
}

}  // namespace lbac
