#include "lbac/eval.hpp"

namespace lbac {

std::string to_string(RuntimeFault::Kind k) {
  switch (k) {
    case RuntimeFault::Kind::StepBudgetExceeded:
      return "StepBudgetExceeded";
    case RuntimeFault::Kind::DepthExceeded:
      return "DepthExceeded";
    case RuntimeFault::Kind::Timeout:
      return "Timeout";
    case RuntimeFault::Kind::MemoryLimit:
      return "MemoryLimit";
    case RuntimeFault::Kind::EffectIsolation:
      return "EffectIsolation";
    case RuntimeFault::Kind::PrimitiveFailure:
      return "PrimitiveFailure";
    case RuntimeFault::Kind::Internal:
      return "Internal";
  }
  return "Unknown";
}

RuntimeFault::RuntimeFault(Kind kind, const std::string& what)
    : Error("runtime fault (" + to_string(kind) + "): " + what), kind_(kind) {}

EffectError::EffectError(std::string code, const std::string& detail)
    : Error("effect error (" + code + "): " + detail), code_(std::move(code)), detail_(detail) {}

Value make_host_thunk(std::string effect, std::string label, Thunk::HostFn fn) {
  auto t = std::make_shared<Thunk>();
  t->kind = Thunk::Kind::Host;
  t->effect = std::move(effect);
  t->label = std::move(label);
  t->host = std::move(fn);
  return Value{std::shared_ptr<const Thunk>(std::move(t))};
}

Value make_return_thunk(Value v) {
  auto t = std::make_shared<Thunk>();
  t->kind = Thunk::Kind::Return;
  t->value = std::move(v);
  return Value{std::shared_ptr<const Thunk>(std::move(t))};
}

struct DepthScope {
  explicit DepthScope(Interp& i) : interp(i) {
    if (++interp.depth_ > interp.budget_.max_depth) {
      --interp.depth_;
      throw RuntimeFault(RuntimeFault::Kind::DepthExceeded,
                         "recursion depth limit " + std::to_string(interp.budget_.max_depth) +
                             " exceeded");
    }
  }
  ~DepthScope() { --interp.depth_; }
  Interp& interp;
};

Interp::Interp(Budget budget, AgentHost* agents) : budget_(budget), agents_(agents) {}

void Interp::tick() {
  if (++steps_ > budget_.max_steps) {
    throw RuntimeFault(RuntimeFault::Kind::StepBudgetExceeded,
                       "evaluation step budget " + std::to_string(budget_.max_steps) +
                           " exceeded");
  }
  if (budget_.deadline && (steps_ & 0xfff) == 0 &&
      std::chrono::steady_clock::now() > *budget_.deadline) {
    throw RuntimeFault(RuntimeFault::Kind::Timeout, "wall-clock limit exceeded");
  }
}

Value Interp::eval_program(const CertificateP& cert, const EnvP& env) {
  if (!cert) throw RuntimeFault(RuntimeFault::Kind::Internal, "refusing to run an unchecked program");
  return eval(cert->program(), env, cert);
}

namespace {

Value closure_value(std::string param, ExprP body, EnvP env, std::string self, CertificateP cert) {
  return Value{std::make_shared<const Closure>(
      Closure{std::move(param), std::move(body), std::move(env), std::move(self), std::move(cert)})};
}

const Value& lookup_or_fault(const EnvP& env, const std::string& name) {
  const Value* v = env->lookup(name);
  if (!v) throw RuntimeFault(RuntimeFault::Kind::Internal, "unbound variable `" + name + "`");
  return *v;
}

EnvP enter_closure(const Value& fn, const Value& arg) {
  const Closure& c = fn.as_closure();
  EnvP env = c.env;
  if (!c.self_name.empty()) env = ValueEnv::extend(env, c.self_name, fn);
  return ValueEnv::extend(env, c.param, arg);
}

}  // namespace

Value Interp::eval(ExprP e, EnvP env, CertificateP cert) {
  DepthScope depth(*this);
  while (true) {
    tick();
    switch (e->kind) {
      case Expr::Kind::IntLit:
        return Value::integer(e->int_value);
      case Expr::Kind::StrLit:
        return Value::string(e->text);
      case Expr::Kind::BoolLit:
        return Value::boolean(e->bool_value);
      case Expr::Kind::UnitLit:
        return Value::unit();
      case Expr::Kind::ListLit: {
        Value::List items;
        items.reserve(e->kids.size());
        for (const auto& k : e->kids) items.push_back(eval(k, env, cert));
        return Value::list(std::move(items));
      }
      case Expr::Kind::Var: {
        const Value& v = lookup_or_fault(env, e->text);
        if (const TypeP* target = cert->agent_target(e.get()); target && v.is_prim()) {
          auto app = std::make_shared<PrimApp>(v.as_prim());
          app->agent_target = *target;
          return Value{std::shared_ptr<const PrimApp>(std::move(app))};
        }
        return v;
      }
      case Expr::Kind::Lambda:
        return closure_value(e->text, e->kids[0], env, "", cert);
      case Expr::Kind::Apply: {
        Value fn = eval(e->kids[0], env, cert);
        Value arg = eval(e->kids[1], env, cert);
        if (fn.is_closure()) {
          const Closure& c = fn.as_closure();
          ExprP body = c.body;
          CertificateP body_cert = c.cert;
          env = enter_closure(fn, arg);
          e = std::move(body);
          cert = std::move(body_cert);
          continue;
        }
        return apply_prim(fn, arg);
      }
      case Expr::Kind::Let: {
        const ExprP& bound = e->kids[0];
        Value v = bound->kind == Expr::Kind::Lambda
                      ? closure_value(bound->text, bound->kids[0], env, e->text, cert)
                      : eval(bound, env, cert);
        env = ValueEnv::extend(env, e->text, std::move(v));
        e = e->kids[1];
        continue;
      }
      case Expr::Kind::If: {
        bool c = eval(e->kids[0], env, cert).as_bool();
        e = c ? e->kids[1] : e->kids[2];
        continue;
      }
      case Expr::Kind::BinOp: {
        if (e->text == "&&" || e->text == "||") {
          bool lhs = eval(e->kids[0], env, cert).as_bool();
          if (lhs == (e->text == "||")) return Value::boolean(lhs);
          e = e->kids[1];
          continue;
        }
        Value op = lookup_or_fault(env, e->text);
        Value lhs = eval(e->kids[0], env, cert);
        Value rhs = eval(e->kids[1], env, cert);
        Value args[] = {lhs, rhs};
        return apply(op, args);
      }
      case Expr::Kind::Return: {
        auto t = std::make_shared<Thunk>();
        t->kind = Thunk::Kind::Return;
        t->effect = cert->effect_of(e.get());
        t->value = eval(e->kids[0], env, cert);
        return Value{std::shared_ptr<const Thunk>(std::move(t))};
      }
      case Expr::Kind::Do: {
        auto t = std::make_shared<Thunk>();
        t->kind = Thunk::Kind::Do;
        t->effect = cert->effect_of(e.get());
        t->block = e;
        t->env = env;
        t->cert = cert;
        return Value{std::shared_ptr<const Thunk>(std::move(t))};
      }
      case Expr::Kind::Annot:
        e = e->kids[0];
        continue;
    }
    throw RuntimeFault(RuntimeFault::Kind::Internal, "unknown expression kind");
  }
}

Value Interp::apply(const Value& fn, const Value& arg) {
  if (fn.is_closure()) {
    DepthScope depth(*this);
    const Closure& c = fn.as_closure();
    return eval(c.body, enter_closure(fn, arg), c.cert);
  }
  return apply_prim(fn, arg);
}

Value Interp::apply(const Value& fn, std::span<const Value> args) {
  Value cur = fn;
  for (const auto& a : args) cur = apply(cur, a);
  return cur;
}

Value Interp::apply_prim(const Value& fn, const Value& arg) {
  tick();
  const PrimApp& app = fn.as_prim();
  std::vector<Value> args = app.args;
  args.push_back(arg);
  if (args.size() < app.prim->arity) {
    return Value{std::make_shared<const PrimApp>(PrimApp{app.prim, std::move(args), app.agent_target})};
  }
  if (!app.prim->effect.empty()) {
    auto t = std::make_shared<Thunk>();
    t->kind = Thunk::Kind::Prim;
    t->effect = app.prim->effect;
    t->prim = app.prim;
    t->args = std::move(args);
    return Value{std::shared_ptr<const Thunk>(std::move(t))};
  }
  DepthScope depth(*this);
  PrimCall call{*this, nullptr, args, app.agent_target ? &app.agent_target : nullptr};
  return app.prim->fn(call);
}

Value Interp::run(const Value& v, EffectContext& ctx) {
  DepthScope depth(*this);
  std::shared_ptr<const Thunk> th = v.as_thunk();
  while (true) {
    tick();
    if (!th->effect.empty() && th->effect != ctx.effect) {
      throw RuntimeFault(RuntimeFault::Kind::EffectIsolation,
                         "a " + th->effect + " computation cannot run in a " + ctx.effect +
                             " context");
    }
    switch (th->kind) {
      case Thunk::Kind::Return:
        return th->value;
      case Thunk::Kind::Host:
        return th->host(*this, ctx);
      case Thunk::Kind::Prim: {
        auto it = ctx.primitive_table.find(th->prim->name);
        if (it == ctx.primitive_table.end()) {
          throw RuntimeFault(RuntimeFault::Kind::EffectIsolation,
                             "primitive `" + th->prim->name + "` is not available in " + ctx.effect);
        }
        PrimCall call{*this, &ctx, th->args, nullptr};
        return it->second(call);
      }
      case Thunk::Kind::Do: {
        EnvP env = th->env;
        const auto& stmts = th->block->stmts;
        std::shared_ptr<const Thunk> next;
        for (std::size_t i = 0; i < stmts.size(); ++i) {
          const DoStmt& st = stmts[i];
          switch (st.kind) {
            case DoStmt::Kind::Bind: {
              Value r = run(eval(st.rhs, env, th->cert), ctx);
              env = ValueEnv::extend(env, st.name, std::move(r));
              break;
            }
            case DoStmt::Kind::Let: {
              Value bound = st.rhs->kind == Expr::Kind::Lambda
                                ? closure_value(st.rhs->text, st.rhs->kids[0], env, st.name, th->cert)
                                : eval(st.rhs, env, th->cert);
              env = ValueEnv::extend(env, st.name, std::move(bound));
              break;
            }
            case DoStmt::Kind::Expr: {
              Value action = eval(st.rhs, env, th->cert);
              if (i + 1 == stmts.size()) {
                next = action.as_thunk();
              } else {
                run(action, ctx);
              }
              break;
            }
          }
        }
        th = std::move(next);  // tail position: keep looping instead of recursing
        continue;
      }
    }
    throw RuntimeFault(RuntimeFault::Kind::Internal, "unknown computation kind");
  }
}

Value eval_pure(Interp& interp, const CertificateP& cert, const EnvP& env) {
  return interp.eval_program(cert, env);
}

Value run_effect(Interp& interp, EffectContext& ctx, const Value& thunk) {
  return interp.run(thunk, ctx);
}

}  // namespace lbac
