#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lbac/library.hpp"

namespace lbac {

using Principal = std::string;
using Clause = std::set<Principal>;  // disjunction

/// Conjunction of disjunctive clauses over principals, kept canonical: sorted,
/// deduplicated, no clause a superset of another. No clauses is True; a single
/// empty clause is False.
class CnfFormula {
 public:
  CnfFormula() = default;
  static CnfFormula truth() { return {}; }
  static CnfFormula falsity();
  static CnfFormula of(std::vector<Clause> clauses);
  static CnfFormula principal(const Principal& p);

  const std::vector<Clause>& clauses() const { return clauses_; }
  bool is_true() const { return clauses_.empty(); }
  bool is_false() const { return clauses_.size() == 1 && clauses_[0].empty(); }

  CnfFormula conj(const CnfFormula& other) const;
  CnfFormula disj(const CnfFormula& other) const;

  bool operator==(const CnfFormula& o) const { return clauses_ == o.clauses_; }
  bool operator!=(const CnfFormula& o) const { return !(*this == o); }
  bool operator<(const CnfFormula& o) const { return clauses_ < o.clauses_; }

  std::string render() const;
  nlohmann::json to_json() const;
  static CnfFormula from_json(const nlohmann::json& j);

 private:
  std::vector<Clause> clauses_;
};

/// f ⇒ g: every clause of g contains some clause of f.
bool implies(const CnfFormula& f, const CnfFormula& g);

struct DCLabel {
  CnfFormula secrecy;
  CnfFormula integrity;

  bool operator==(const DCLabel& o) const {
    return secrecy == o.secrecy && integrity == o.integrity;
  }
  bool operator!=(const DCLabel& o) const { return !(*this == o); }
  bool operator<(const DCLabel& o) const {
    return secrecy != o.secrecy ? secrecy < o.secrecy : integrity < o.integrity;
  }
  std::string render() const;
  nlohmann::json to_json() const;
  static DCLabel from_json(const nlohmann::json& j);
};

/// Bottom of the lattice: readable by anyone, influenced by no one.
DCLabel public_label();
/// Top of the lattice.
DCLabel top_label();
bool can_flow_to(const DCLabel& from, const DCLabel& to);
DCLabel join(const DCLabel& a, const DCLabel& b);
DCLabel meet(const DCLabel& a, const DCLabel& b);

struct Privilege {
  std::set<Principal> owned;
  CnfFormula formula() const;
};

/// `l` after exercising `priv`: secrecy clauses naming an owned principal are
/// dropped and integrity is strengthened by the owned principals.
DCLabel weaken(const DCLabel& l, const Privilege& priv);
/// canFlowTo relative to a privilege.
bool can_flow_to_p(const Privilege& priv, const DCLabel& from, const DCLabel& to);

// ---------------------------------------------------------------------------
// Mock environment

struct WebPage {
  std::string body;
  CnfFormula secrecy;
};

struct ChannelMessage {
  std::string sender;
  std::string text;
};

struct Channel {
  DCLabel label;
  std::vector<ChannelMessage> messages;
};

struct Delivery {
  std::string kind;  // "dm" or "user"
  std::string to;
  std::string body;
};

struct DcEnvironment {
  std::map<std::string, WebPage> web;  // by URL
  std::set<std::string> users;
  std::map<std::string, Channel> channels;
  std::vector<Delivery> outbox;

  /// web: {url: {"body", "secrecy"?}}; env: {"users": [...], "channels": {name:
  /// {"label"?, "messages": [{"sender", "text"}]}}}.
  static DcEnvironment from_json(const nlohmann::json& web, const nlohmann::json& env);
  static DcEnvironment load(const std::string& web_path, const std::string& env_path);
  nlohmann::json snapshot() const;
};

struct AuditRecord {
  std::string op;
  DCLabel sink;
  DCLabel current;
  std::optional<DCLabel> value;
  bool allowed;
  nlohmann::json to_json() const;
};

/// Label of the user-facing console.
DCLabel user_sink();
/// Label of a direct message to `recipient`.
DCLabel dm_sink(const std::string& recipient);
/// Privilege the messaging tool holds internally.
Privilege tool_privilege();

/// Offline recomputation of a sink check from one audit record.
bool replay_allows(const AuditRecord& r);

struct LabelStep {
  DCLabel label;
  bool restore = false;  // set when toLabeled puts the outer label back
};

class DcState : public IoState {
 public:
  DcState(DcEnvironment e, bool enforce_labels);

  DCLabel current = public_label();
  DCLabel clearance = top_label();
  std::shared_ptr<DcEnvironment> env;
  std::vector<AuditRecord> audit;
  /// Every current-label change, for monotonicity checks.
  std::vector<LabelStep> trace;
  bool enforce;

  void raise_to(const DCLabel& l);
  std::string audit_jsonl() const;
};

struct IfcOptions {
  std::string effect = "DC";  // "IO" exposes the same API without label checks
  bool enforce = true;
};

/// Registers DCLabel, Labeled, Message, User, the DC effect (unless
/// options.effect names an existing one), its primitives, and `dcLib`.
/// DC options: {"web": path, "env": path}.
void install_ifc(Library& lib, const IfcOptions& options = {});

/// Value-level views for tests.
Value label_value(const DCLabel& l);
std::optional<DCLabel> label_of_value(const Value& v);
std::optional<DCLabel> labeled_label(const Value& v);

}  // namespace lbac
