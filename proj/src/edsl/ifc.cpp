#include "lbac/ifc.hpp"

#include <algorithm>
#include <fstream>

namespace lbac {

// ---------------------------------------------------------------------------
// Formulas

CnfFormula CnfFormula::falsity() {
  CnfFormula f;
  f.clauses_.push_back({});
  return f;
}

CnfFormula CnfFormula::principal(const Principal& p) { return of({{p}}); }

CnfFormula CnfFormula::of(std::vector<Clause> clauses) {
  std::sort(clauses.begin(), clauses.end(), [](const Clause& a, const Clause& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  CnfFormula f;
  for (auto& c : clauses) {
    bool absorbed = std::any_of(f.clauses_.begin(), f.clauses_.end(), [&](const Clause& k) {
      return std::includes(c.begin(), c.end(), k.begin(), k.end());
    });
    if (!absorbed) f.clauses_.push_back(std::move(c));
  }
  std::sort(f.clauses_.begin(), f.clauses_.end());
  return f;
}

CnfFormula CnfFormula::conj(const CnfFormula& other) const {
  std::vector<Clause> all = clauses_;
  all.insert(all.end(), other.clauses_.begin(), other.clauses_.end());
  return of(std::move(all));
}

CnfFormula CnfFormula::disj(const CnfFormula& other) const {
  if (is_true() || other.is_true()) return truth();
  std::vector<Clause> all;
  for (const auto& c : clauses_) {
    for (const auto& d : other.clauses_) {
      Clause u = c;
      u.insert(d.begin(), d.end());
      all.push_back(std::move(u));
    }
  }
  return of(std::move(all));
}

std::string CnfFormula::render() const {
  if (is_true()) return "True";
  if (is_false()) return "False";
  std::string out;
  for (std::size_t i = 0; i < clauses_.size(); ++i) {
    if (i) out += " /\\ ";
    const auto& c = clauses_[i];
    bool paren = c.size() > 1 && clauses_.size() > 1;
    if (paren) out += "(";
    std::size_t j = 0;
    for (const auto& p : c) out += (j++ ? " \\/ \"" : "\"") + p + "\"";
    if (paren) out += ")";
  }
  return out;
}

nlohmann::json CnfFormula::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : clauses_) arr.push_back(std::vector<std::string>(c.begin(), c.end()));
  return arr;
}

CnfFormula CnfFormula::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("formula must be an array of clauses");
  std::vector<Clause> clauses;
  for (const auto& c : j) {
    if (!c.is_array()) throw ConfigError("clause must be an array of principals");
    Clause cl;
    for (const auto& p : c) cl.insert(p.get<std::string>());
    clauses.push_back(std::move(cl));
  }
  return of(std::move(clauses));
}

bool implies(const CnfFormula& f, const CnfFormula& g) {
  return std::all_of(g.clauses().begin(), g.clauses().end(), [&](const Clause& d) {
    return std::any_of(f.clauses().begin(), f.clauses().end(), [&](const Clause& c) {
      return std::includes(d.begin(), d.end(), c.begin(), c.end());
    });
  });
}

// ---------------------------------------------------------------------------
// Labels

std::string DCLabel::render() const { return "< " + secrecy.render() + " , " + integrity.render() + " >"; }

nlohmann::json DCLabel::to_json() const {
  return {{"secrecy", secrecy.to_json()}, {"integrity", integrity.to_json()}};
}

DCLabel DCLabel::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("label must be an object");
  DCLabel l = public_label();
  if (j.contains("secrecy")) l.secrecy = CnfFormula::from_json(j.at("secrecy"));
  if (j.contains("integrity")) l.integrity = CnfFormula::from_json(j.at("integrity"));
  return l;
}

DCLabel public_label() { return {CnfFormula::truth(), CnfFormula::falsity()}; }
DCLabel top_label() { return {CnfFormula::falsity(), CnfFormula::truth()}; }

bool can_flow_to(const DCLabel& from, const DCLabel& to) {
  return implies(to.secrecy, from.secrecy) && implies(from.integrity, to.integrity);
}

DCLabel join(const DCLabel& a, const DCLabel& b) {
  return {a.secrecy.conj(b.secrecy), a.integrity.disj(b.integrity)};
}

DCLabel meet(const DCLabel& a, const DCLabel& b) {
  return {a.secrecy.disj(b.secrecy), a.integrity.conj(b.integrity)};
}

CnfFormula Privilege::formula() const {
  std::vector<Clause> cs;
  for (const auto& p : owned) cs.push_back({p});
  return CnfFormula::of(std::move(cs));
}

DCLabel weaken(const DCLabel& l, const Privilege& priv) {
  std::vector<Clause> kept;
  for (const auto& c : l.secrecy.clauses()) {
    bool owned = std::any_of(c.begin(), c.end(), [&](const Principal& p) { return priv.owned.count(p); });
    if (!owned) kept.push_back(c);
  }
  return {CnfFormula::of(std::move(kept)), l.integrity.conj(priv.formula())};
}

bool can_flow_to_p(const Privilege& priv, const DCLabel& from, const DCLabel& to) {
  return can_flow_to(weaken(from, priv), to);
}

DCLabel user_sink() { return {CnfFormula::principal("user"), CnfFormula::principal("user")}; }

DCLabel dm_sink(const std::string& recipient) {
  return {CnfFormula::principal(recipient), CnfFormula::principal("user")};
}

Privilege tool_privilege() { return Privilege{{"user"}}; }

bool dm_caller_ok(const DCLabel& current, const DCLabel& sink) {
  return current.integrity.is_false() && implies(sink.secrecy, current.secrecy);
}

bool replay_allows(const AuditRecord& r) {
  if (r.op == "writeToUser") return can_flow_to(r.current, r.sink);
  if (r.op == "sendDM") {
    return r.value && dm_caller_ok(r.current, r.sink) && can_flow_to_p(tool_privilege(), *r.value, r.sink);
  }
  return false;
}

nlohmann::json AuditRecord::to_json() const {
  return {{"op", op},
          {"sink", sink.to_json()},
          {"current_label", current.to_json()},
          {"value_label", value ? value->to_json() : nlohmann::json()},
          {"allowed", allowed}};
}

// ---------------------------------------------------------------------------
// Environment

DcEnvironment DcEnvironment::from_json(const nlohmann::json& web, const nlohmann::json& env) {
  DcEnvironment e;
  try {
    for (const auto& [url, page] : web.items()) {
      WebPage p{page.at("body").get<std::string>(), CnfFormula::truth()};
      if (page.contains("secrecy")) p.secrecy = CnfFormula::from_json(page.at("secrecy"));
      e.web[url] = std::move(p);
    }
    for (const auto& u : env.at("users")) e.users.insert(u.get<std::string>());
    for (const auto& [name, ch] : env.at("channels").items()) {
      Channel c{public_label(), {}};
      if (ch.contains("label")) c.label = DCLabel::from_json(ch.at("label"));
      for (const auto& m : ch.value("messages", nlohmann::json::array())) {
        c.messages.push_back({m.at("sender").get<std::string>(), m.at("text").get<std::string>()});
      }
      e.channels[name] = std::move(c);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed messaging fixture: ") + ex.what());
  }
  return e;
}

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fixture " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("fixture " + path + ": " + ex.what());
  }
}

}  // namespace

DcEnvironment DcEnvironment::load(const std::string& web_path, const std::string& env_path) {
  return from_json(read_json(web_path), read_json(env_path));
}

nlohmann::json DcEnvironment::snapshot() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : outbox) out.push_back({{"kind", d.kind}, {"to", d.to}, {"body", d.body}});
  nlohmann::json dms = nlohmann::json::array(), user = nlohmann::json::array();
  for (const auto& d : outbox) {
    if (d.kind == "dm") {
      dms.push_back({{"to", d.to}, {"body", d.body}});
    } else {
      user.push_back(d.body);
    }
  }
  return {{"outbox", out}, {"dms", dms}, {"user_view", user}};
}

DcState::DcState(DcEnvironment e, bool enforce_labels)
    : IoState(std::make_shared<MemoryHostIo>()),
      env(std::make_shared<DcEnvironment>(std::move(e))),
      enforce(enforce_labels) {
  trace.push_back({current, false});
}

void DcState::raise_to(const DCLabel& l) {
  if (enforce && !can_flow_to(l, clearance)) {
    throw EffectError("ClearanceExceeded",
                      "label " + l.render() + " is above the clearance " + clearance.render());
  }
  current = l;
  trace.push_back({l, false});
}

std::string DcState::audit_jsonl() const {
  std::string out;
  for (const auto& r : audit) out += r.to_json().dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Values

namespace {

constexpr const char* kLabelTag = "DCLabel";
constexpr const char* kLabeledTag = "Labeled";
constexpr const char* kMessageTag = "Message";
constexpr const char* kUserTag = "User";

class LabelPayload : public OpaquePayload {
 public:
  explicit LabelPayload(DCLabel l) : label(std::move(l)) {}
  bool equals(const OpaquePayload& o) const override {
    const auto* p = dynamic_cast<const LabelPayload*>(&o);
    return p && p->label == label;
  }
  std::string show() const override { return label.render(); }
  DCLabel label;
};

class LabeledPayload : public OpaquePayload {
 public:
  LabeledPayload(DCLabel l, Value v) : label(std::move(l)), value(std::move(v)) {}
  LabeledPayload(DCLabel l, std::string code, std::string detail)
      : label(std::move(l)), failed(true), error_code(std::move(code)), error_detail(std::move(detail)) {}
  std::string show() const override { return label.render(); }
  DCLabel label;
  Value value;
  bool failed = false;
  std::string error_code;
  std::string error_detail;
};

class TextPayload : public OpaquePayload {
 public:
  explicit TextPayload(std::string t) : text(std::move(t)) {}
  bool equals(const OpaquePayload& o) const override {
    const auto* p = dynamic_cast<const TextPayload*>(&o);
    return p && p->text == text;
  }
  std::string show() const override { return text; }
  std::string text;
};

const LabeledPayload& labeled(const Value& v) { return v.payload<LabeledPayload>(kLabeledTag); }
const DCLabel& label_arg(const Value& v) { return v.payload<LabelPayload>(kLabelTag).label; }

std::vector<Clause> clauses_from(const Value& v) {
  std::vector<Clause> out;
  for (const auto& c : v.as_list()) {
    Clause cl;
    for (const auto& p : c.as_list()) cl.insert(p.as_string());
    out.push_back(std::move(cl));
  }
  return out;
}

std::string host_of(const std::string& url) {
  auto start = url.find("://");
  start = start == std::string::npos ? 0 : start + 3;
  auto end = url.find_first_of("/:?#", start);
  return url.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

[[noreturn]] void violation(const std::string& what) { throw EffectError("LabelViolation", what); }

// Restores the floating label on every exit path.
struct LabelRestore {
  DcState& st;
  DCLabel saved;
  ~LabelRestore() {
    st.current = saved;
    st.trace.push_back({saved, true});
  }
};

}  // namespace

Value label_value(const DCLabel& l) { return Value::opaque(kLabelTag, std::make_shared<LabelPayload>(l)); }

std::optional<DCLabel> label_of_value(const Value& v) {
  if (!v.is_opaque() || v.as_opaque().tag != kLabelTag) return std::nullopt;
  return label_arg(v);
}

std::optional<DCLabel> labeled_label(const Value& v) {
  if (!v.is_opaque() || v.as_opaque().tag != kLabeledTag) return std::nullopt;
  return labeled(v).label;
}

void install_ifc(Library& lib, const IfcOptions& opts) {
  lib.register_opaque(kLabelTag, 0);
  lib.register_opaque(kLabeledTag, 2);
  lib.register_opaque(kMessageTag, 0);
  lib.register_opaque(kUserTag, 0);
  const std::string eff = opts.effect;
  const bool own_effect = !lib.registry().effects.count(eff);
  if (own_effect) {
    lib.register_effect(eff, {}, [enforce = opts.enforce](const nlohmann::json& o) {
      if (!o.contains("web") || !o.contains("env")) throw ConfigError("DC needs `web` and `env` options");
      return std::make_shared<DcState>(
          DcEnvironment::load(o.at("web").get<std::string>(), o.at("env").get<std::string>()), enforce);
    });
  }
  const TypeRegistry& reg = lib.registry();
  auto E = [&](const std::string& t) { return eff + " " + t; };
  auto st = [](PrimCall& c) -> DcState& { return c.ctx->state_as<DcState>(); };
  auto def = [&](const std::string& name, const std::string& type, const std::string& doc, PrimFn fn) {
    lib.add_primitive(make_prim(reg, name, type, doc, std::move(fn)));
  };

  def("httpGet", "String -> " + E("String"), "fetch a web page; taints the current label with its host",
      [st](PrimCall& c) {
        DcState& s = st(c);
        const std::string& url = c.args[0].as_string();
        auto it = s.env->web.find(url);
        c.interp.note_host_effect();
        if (it == s.env->web.end()) throw EffectError("UnknownHost", "no page at " + url);
        s.raise_to(join(s.current, DCLabel{it->second.secrecy, CnfFormula::principal(host_of(url))}));
        return Value::string(it->second.body);
      });
  def("readChannel", "String -> " + E("[String]"), "messages of a channel; raises the current label",
      [st](PrimCall& c) {
        DcState& s = st(c);
        auto it = s.env->channels.find(c.args[0].as_string());
        c.interp.note_host_effect();
        if (it == s.env->channels.end()) {
          throw EffectError("UnknownChannel", "no channel #" + c.args[0].as_string());
        }
        s.raise_to(join(s.current, it->second.label));
        Value::List out;
        for (const auto& m : it->second.messages) out.push_back(Value::string(m.sender + ": " + m.text));
        return Value::list(std::move(out));
      });
  def("writeToUser", "String -> " + E("()"), "show text to the user", [st](PrimCall& c) {
    DcState& s = st(c);
    DCLabel sink = user_sink();
    bool ok = can_flow_to(s.current, sink);
    s.audit.push_back({"writeToUser", sink, s.current, std::nullopt, ok || !s.enforce});
    if (!ok && s.enforce) {
      violation("current label " + s.current.render() + " cannot flow to the user sink " + sink.render());
    }
    c.interp.note_host_effect();
    s.env->outbox.push_back({"user", "user", c.args[0].as_string()});
    return Value::unit();
  });
  def("sendDM", "User -> Labeled DCLabel Message -> " + E("()"),
      "send a direct message; the body is declassified by the tool", [st](PrimCall& c) {
        DcState& s = st(c);
        const std::string& to = c.args[0].payload<TextPayload>(kUserTag).text;
        const auto& lv = labeled(c.args[1]);
        DCLabel sink = dm_sink(to);
        bool caller_ok = dm_caller_ok(s.current, sink);
        bool declass_ok = can_flow_to_p(tool_privilege(), lv.label, sink);
        s.audit.push_back({"sendDM", sink, s.current, lv.label, (caller_ok && declass_ok) || !s.enforce});
        if (s.enforce && !caller_ok) {
          violation("sendDM check (1): caller label " + s.current.render() + " is tainted");
        }
        if (s.enforce && !declass_ok) {
          throw EffectError("LabelViolation", "sendDM check (2): cannot declassify " + lv.label.render() +
                                                  " to " + sink.render() + " (InsufficientPrivilege)");
        }
        if (!s.env->users.count(to)) throw EffectError("UnknownUser", "no user named " + to);
        if (lv.failed) throw EffectError(lv.error_code, lv.error_detail);
        c.interp.note_host_effect();
        s.env->outbox.push_back({"dm", to, lv.value.payload<TextPayload>(kMessageTag).text});
        return Value::unit();
      });
  def("toLabeled", "DCLabel -> " + E("a") + " -> " + E("(Labeled DCLabel a)"),
      "run a computation in isolation and seal its result under the bound", [st](PrimCall& c) {
        DcState& s = st(c);
        const DCLabel& bound = label_arg(c.args[0]);
        if (s.enforce && !(can_flow_to(s.current, bound) && can_flow_to(bound, s.clearance))) {
          throw EffectError("LabelBoundExceeded", "bound " + bound.render() + " is not between the current label " +
                                                      s.current.render() + " and the clearance");
        }
        DCLabel end;
        std::optional<Value> result;
        std::optional<EffectError> failure;
        {
          LabelRestore restore{s, s.current};
          try {
            result = c.interp.run(c.args[1], *c.ctx);
          } catch (const EffectError& e) {
            failure = e;
          }
          end = s.current;
        }
        if (!failure && s.enforce && !can_flow_to(end, bound)) {
          throw EffectError("LabelBoundExceeded",
                            "sub-computation ended at " + end.render() + ", above the bound " + bound.render());
        }
        if (failure) {
          return Value::opaque(kLabeledTag,
                               std::make_shared<LabeledPayload>(bound, failure->code(), failure->detail()));
        }
        return Value::opaque(kLabeledTag, std::make_shared<LabeledPayload>(bound, std::move(*result)));
      });
  def("unlabel", "Labeled DCLabel a -> " + E("a"), "read a labeled value, raising the current label",
      [st](PrimCall& c) {
        DcState& s = st(c);
        const auto& lv = labeled(c.args[0]);
        s.raise_to(join(s.current, lv.label));
        if (lv.failed) throw EffectError(lv.error_code, lv.error_detail);
        return lv.value;
      });
  def("getLabel", E("DCLabel"), "the current label",
      [st](PrimCall& c) { return label_value(st(c).current); });

  def("labelOf", "Labeled DCLabel a -> DCLabel", "label of a labeled value",
      [](PrimCall& c) { return label_value(labeled(c.args[0]).label); });
  lib.add_value("dcPublic", mono(t_opaque(kLabelTag)), "public, untainted label", label_value(public_label()));
  lib.add_value("quarantine", mono(t_opaque(kLabelTag)), "bound for untrusted sub-computations",
                label_value({CnfFormula::truth(), CnfFormula::truth()}));
  def("dcLabel", "[[String]] -> [[String]] -> DCLabel", "label from secrecy and integrity clauses",
      [](PrimCall& c) {
        return label_value({CnfFormula::of(clauses_from(c.args[0])), CnfFormula::of(clauses_from(c.args[1]))});
      });
  def("canFlowTo", "DCLabel -> DCLabel -> Bool", "label ordering", [](PrimCall& c) {
    return Value::boolean(can_flow_to(label_arg(c.args[0]), label_arg(c.args[1])));
  });
  def("message", "String -> Message", "message with the given body", [](PrimCall& c) {
    return Value::opaque(kMessageTag, std::make_shared<TextPayload>(c.args[0].as_string()));
  });
  def("messageText", "Message -> String", "body of a message",
      [](PrimCall& c) { return Value::string(c.args[0].payload<TextPayload>(kMessageTag).text); });
  def("userNamed", "String -> User", "user handle", [](PrimCall& c) {
    return Value::opaque(kUserTag, std::make_shared<TextPayload>(c.args[0].as_string()));
  });
  def("userName", "User -> String", "name of a user",
      [](PrimCall& c) { return Value::string(c.args[0].payload<TextPayload>(kUserTag).text); });

  lib.add_defs(lib.make_defs("dcLib", {"httpGet", "readChannel", "writeToUser", "sendDM", "toLabeled", "unlabel",
                                       "getLabel", "labelOf", "dcPublic", "quarantine", "dcLabel", "canFlowTo",
                                       "message", "messageText", "userNamed", "userName"}));
}

}  // namespace lbac
