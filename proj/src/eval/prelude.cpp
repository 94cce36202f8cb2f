// Pure prelude and effect-polymorphic combinators.
#include <algorithm>
#include <cctype>

#include "lbac/library.hpp"

namespace lbac {

namespace {

[[noreturn]] void prim_fail(const std::string& what) {
  throw RuntimeFault(RuntimeFault::Kind::PrimitiveFailure, what);
}

class OrderingPayload : public OpaquePayload {
 public:
  explicit OrderingPayload(int o) : ord(o) {}
  bool equals(const OpaquePayload& other) const override {
    const auto* p = dynamic_cast<const OrderingPayload*>(&other);
    return p && p->ord == ord;
  }
  std::string show() const override { return ord < 0 ? "LT" : ord > 0 ? "GT" : "EQ"; }
  int ord;
};

Value ordering(int o) { return Value::opaque("Ordering", std::make_shared<OrderingPayload>(o)); }

int ordering_of(const Value& v) { return v.payload<OrderingPayload>("Ordering").ord; }

BigInt floor_div(const BigInt& a, const BigInt& b) {
  if (b == 0) prim_fail("division by zero");
  BigInt q = a / b;
  if (a % b != 0 && ((a < 0) != (b < 0))) q -= 1;
  return q;
}

BigInt floor_mod(const BigInt& a, const BigInt& b) {
  if (b == 0) prim_fail("division by zero");
  BigInt r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) r += b;
  return r;
}

std::size_t to_count(const BigInt& n) {
  if (n <= 0) return 0;
  if (n > BigInt(kMaxListLength) * 64) return kMaxListLength * 64;
  return static_cast<std::size_t>(n);
}

// Stable merge sort; `less` may call back into the interpreter and may throw.
void merge_sort(Value::List& xs, const std::function<bool(const Value&, const Value&)>& less) {
  if (xs.size() < 2) return;
  Value::List buf(xs.size());
  for (std::size_t width = 1; width < xs.size(); width *= 2) {
    for (std::size_t lo = 0; lo < xs.size(); lo += 2 * width) {
      std::size_t mid = std::min(lo + width, xs.size());
      std::size_t hi = std::min(lo + 2 * width, xs.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) buf[k++] = less(xs[j], xs[i]) ? xs[j++] : xs[i++];
      while (i < mid) buf[k++] = xs[i++];
      while (j < hi) buf[k++] = xs[j++];
    }
    xs.swap(buf);
  }
}

Value by_key(PrimCall& c, bool want_min) {
  const auto& xs = c.args[1].as_list();
  if (xs.empty()) prim_fail(want_min ? "minimumBy of an empty list" : "maximumBy of an empty list");
  std::size_t best = 0;
  BigInt best_key = c.interp.apply(c.args[0], xs[0]).as_int();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    BigInt k = c.interp.apply(c.args[0], xs[i]).as_int();
    if (want_min ? k < best_key : k > best_key) {
      best = i;
      best_key = std::move(k);
    }
  }
  return xs[best];
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Value string_list(const std::vector<std::string>& parts) {
  Value::List out;
  for (const auto& p : parts) out.push_back(Value::string(p));
  return Value::list(std::move(out));
}

std::string joined(const Value& xs, const std::string& sep, bool terminate) {
  std::string out;
  const auto& items = xs.as_list();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i && !terminate) out += sep;
    out += items[i].as_string();
    if (terminate) out += sep;
    check_string_size(out.size());
  }
  return out;
}

std::string slice(const std::string& s, const BigInt& from, const BigInt& count) {
  std::size_t start = std::min(to_count(from), s.size());
  return s.substr(start, std::min(to_count(count), s.size() - start));
}

}  // namespace

void Library::install_prelude() {
  register_opaque("Ordering", 0);
  const TypeRegistry& reg = registry_;
  auto def = [&](const std::string& name, const std::string& type, const std::string& doc,
                 PrimFn fn) { add_primitive(make_prim(reg, name, type, doc, std::move(fn))); };
  auto a = [](PrimCall& c, std::size_t i) -> const Value& { return c.args[i]; };

  // arithmetic and comparison
  def("+", "Int -> Int -> Int", "addition",
      [a](PrimCall& c) { return checked_int(a(c, 0).as_int() + a(c, 1).as_int()); });
  def("-", "Int -> Int -> Int", "subtraction",
      [a](PrimCall& c) { return checked_int(a(c, 0).as_int() - a(c, 1).as_int()); });
  def("*", "Int -> Int -> Int", "multiplication",
      [a](PrimCall& c) { return checked_int(a(c, 0).as_int() * a(c, 1).as_int()); });
  def("div", "Int -> Int -> Int", "integer division rounding toward negative infinity",
      [a](PrimCall& c) { return Value::integer(floor_div(a(c, 0).as_int(), a(c, 1).as_int())); });
  def("mod", "Int -> Int -> Int", "remainder with the sign of the divisor",
      [a](PrimCall& c) { return Value::integer(floor_mod(a(c, 0).as_int(), a(c, 1).as_int())); });
  def("negate", "Int -> Int", "arithmetic negation",
      [a](PrimCall& c) { return Value::integer(-a(c, 0).as_int()); });
  def("==", "a -> a -> Bool", "structural equality",
      [a](PrimCall& c) { return Value::boolean(values_equal(a(c, 0), a(c, 1))); });
  def("/=", "a -> a -> Bool", "structural inequality",
      [a](PrimCall& c) { return Value::boolean(!values_equal(a(c, 0), a(c, 1))); });
  def("<", "Int -> Int -> Bool", "less than",
      [a](PrimCall& c) { return Value::boolean(a(c, 0).as_int() < a(c, 1).as_int()); });
  def("<=", "Int -> Int -> Bool", "less or equal",
      [a](PrimCall& c) { return Value::boolean(a(c, 0).as_int() <= a(c, 1).as_int()); });
  def(">", "Int -> Int -> Bool", "greater than",
      [a](PrimCall& c) { return Value::boolean(a(c, 0).as_int() > a(c, 1).as_int()); });
  def(">=", "Int -> Int -> Bool", "greater or equal",
      [a](PrimCall& c) { return Value::boolean(a(c, 0).as_int() >= a(c, 1).as_int()); });
  def("++", "String -> String -> String", "string concatenation", [a](PrimCall& c) {
    check_string_size(a(c, 0).as_string().size() + a(c, 1).as_string().size());
    return Value::string(a(c, 0).as_string() + a(c, 1).as_string());
  });
  def("not", "Bool -> Bool", "boolean negation",
      [a](PrimCall& c) { return Value::boolean(!a(c, 0).as_bool()); });
  def("show", "a -> String", "render a value as text",
      [a](PrimCall& c) { return Value::string(show_value(a(c, 0))); });

  add_value("LT", mono(t_opaque("Ordering")), "ordering: less", ordering(-1));
  add_value("EQ", mono(t_opaque("Ordering")), "ordering: equal", ordering(0));
  add_value("GT", mono(t_opaque("Ordering")), "ordering: greater", ordering(1));
  def("compareInt", "Int -> Int -> Ordering", "three-way integer comparison", [a](PrimCall& c) {
    const auto& x = a(c, 0).as_int();
    const auto& y = a(c, 1).as_int();
    return ordering(x < y ? -1 : x > y ? 1 : 0);
  });

  // lists
  def("length", "[a] -> Int", "number of elements",
      [a](PrimCall& c) { return Value::integer(a(c, 0).as_list().size()); });
  def("null", "[a] -> Bool", "whether the list is empty",
      [a](PrimCall& c) { return Value::boolean(a(c, 0).as_list().empty()); });
  def("head", "[a] -> a", "first element (fails on an empty list)", [a](PrimCall& c) {
    const auto& xs = a(c, 0).as_list();
    if (xs.empty()) prim_fail("head of an empty list");
    return xs.front();
  });
  def("last", "[a] -> a", "last element (fails on an empty list)", [a](PrimCall& c) {
    const auto& xs = a(c, 0).as_list();
    if (xs.empty()) prim_fail("last of an empty list");
    return xs.back();
  });
  def("tail", "[a] -> [a]", "all but the first element (fails on an empty list)",
      [a](PrimCall& c) {
        const auto& xs = a(c, 0).as_list();
        if (xs.empty()) prim_fail("tail of an empty list");
        return Value::list(Value::List(xs.begin() + 1, xs.end()));
      });
  def("nth", "Int -> [a] -> a", "element at a zero-based index", [a](PrimCall& c) {
    const auto& i = a(c, 0).as_int();
    const auto& xs = a(c, 1).as_list();
    if (i < 0 || i >= BigInt(xs.size())) prim_fail("nth: index out of range");
    return xs[static_cast<std::size_t>(i)];
  });
  def("reverse", "[a] -> [a]", "reverse a list", [a](PrimCall& c) {
    const auto& xs = a(c, 0).as_list();
    return Value::list(Value::List(xs.rbegin(), xs.rend()));
  });
  def("take", "Int -> [a] -> [a]", "first n elements", [a](PrimCall& c) {
    const auto& xs = a(c, 1).as_list();
    std::size_t n = std::min(to_count(a(c, 0).as_int()), xs.size());
    return Value::list(Value::List(xs.begin(), xs.begin() + n));
  });
  def("drop", "Int -> [a] -> [a]", "all but the first n elements", [a](PrimCall& c) {
    const auto& xs = a(c, 1).as_list();
    std::size_t n = std::min(to_count(a(c, 0).as_int()), xs.size());
    return Value::list(Value::List(xs.begin() + n, xs.end()));
  });
  def("append", "[a] -> [a] -> [a]", "list concatenation", [a](PrimCall& c) {
    Value::List out = a(c, 0).as_list();
    const auto& ys = a(c, 1).as_list();
    check_list_size(out.size() + ys.size());
    out.insert(out.end(), ys.begin(), ys.end());
    return Value::list(std::move(out));
  });
  def("cons", "a -> [a] -> [a]", "prepend an element", [a](PrimCall& c) {
    const auto& xs = a(c, 1).as_list();
    check_list_size(xs.size() + 1);
    Value::List out;
    out.reserve(xs.size() + 1);
    out.push_back(a(c, 0));
    out.insert(out.end(), xs.begin(), xs.end());
    return Value::list(std::move(out));
  });
  def("concat", "[[a]] -> [a]", "flatten one level", [a](PrimCall& c) {
    Value::List out;
    for (const auto& xs : a(c, 0).as_list()) {
      const auto& items = xs.as_list();
      check_list_size(out.size() + items.size());
      out.insert(out.end(), items.begin(), items.end());
    }
    return Value::list(std::move(out));
  });
  def("elem", "a -> [a] -> Bool", "membership test", [a](PrimCall& c) {
    for (const auto& x : a(c, 1).as_list()) {
      if (values_equal(a(c, 0), x)) return Value::boolean(true);
    }
    return Value::boolean(false);
  });
  def("map", "(a -> b) -> [a] -> [b]", "apply a function to every element", [a](PrimCall& c) {
    Value::List out;
    for (const auto& x : a(c, 1).as_list()) out.push_back(c.interp.apply(a(c, 0), x));
    return Value::list(std::move(out));
  });
  def("filter", "(a -> Bool) -> [a] -> [a]", "keep elements satisfying a predicate",
      [a](PrimCall& c) {
        Value::List out;
        for (const auto& x : a(c, 1).as_list()) {
          if (c.interp.apply(a(c, 0), x).as_bool()) out.push_back(x);
        }
        return Value::list(std::move(out));
      });
  def("foldr", "(a -> b -> b) -> b -> [a] -> b", "right fold", [a](PrimCall& c) {
    Value acc = a(c, 1);
    const auto& xs = a(c, 2).as_list();
    for (auto it = xs.rbegin(); it != xs.rend(); ++it) {
      Value args[] = {*it, acc};
      acc = c.interp.apply(a(c, 0), args);
    }
    return acc;
  });
  def("foldl", "(b -> a -> b) -> b -> [a] -> b", "left fold", [a](PrimCall& c) {
    Value acc = a(c, 1);
    for (const auto& x : a(c, 2).as_list()) {
      Value args[] = {acc, x};
      acc = c.interp.apply(a(c, 0), args);
    }
    return acc;
  });
  def("range", "Int -> Int -> [Int]", "inclusive integer range", [a](PrimCall& c) {
    const auto& lo = a(c, 0).as_int();
    const auto& hi = a(c, 1).as_int();
    Value::List out;
    if (hi >= lo) {
      check_list_size(static_cast<std::size_t>(std::min<BigInt>(hi - lo + 1, kMaxListLength + 1)));
      for (BigInt i = lo; i <= hi; ++i) {
        c.interp.tick();
        out.push_back(Value::integer(i));
      }
    }
    return Value::list(std::move(out));
  });
  def("sum", "[Int] -> Int", "sum of a list", [a](PrimCall& c) {
    BigInt total = 0;
    for (const auto& x : a(c, 0).as_list()) total += x.as_int();
    return checked_int(std::move(total));
  });
  def("minimumBy", "(a -> Int) -> [a] -> a", "first element with the smallest key",
      [](PrimCall& c) { return by_key(c, true); });
  def("maximumBy", "(a -> Int) -> [a] -> a", "first element with the largest key",
      [](PrimCall& c) { return by_key(c, false); });
  def("sortOn", "(a -> Int) -> [a] -> [a]", "stable sort by an integer key", [a](PrimCall& c) {
    std::vector<std::pair<BigInt, Value>> keyed;
    for (const auto& x : a(c, 1).as_list()) keyed.emplace_back(c.interp.apply(a(c, 0), x).as_int(), x);
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });
    Value::List out;
    for (auto& [k, v] : keyed) out.push_back(std::move(v));
    return Value::list(std::move(out));
  });
  def("sortBy", "(a -> a -> Ordering) -> [a] -> [a]", "stable sort with a comparison function",
      [a](PrimCall& c) {
        Value::List xs = a(c, 1).as_list();
        merge_sort(xs, [&](const Value& l, const Value& r) {
          Value args[] = {l, r};
          return ordering_of(c.interp.apply(a(c, 0), args)) < 0;
        });
        return Value::list(std::move(xs));
      });

  // strings
  def("strLength", "String -> Int", "length in bytes",
      [a](PrimCall& c) { return Value::integer(a(c, 0).as_string().size()); });
  def("strTake", "Int -> String -> String", "first n bytes", [a](PrimCall& c) {
    return Value::string(slice(a(c, 1).as_string(), 0, a(c, 0).as_int()));
  });
  def("strDrop", "Int -> String -> String", "all but the first n bytes", [a](PrimCall& c) {
    const auto& s = a(c, 1).as_string();
    return Value::string(slice(s, a(c, 0).as_int(), BigInt(s.size())));
  });
  def("words", "String -> [String]", "split on whitespace",
      [a](PrimCall& c) { return string_list(split_words(a(c, 0).as_string())); });
  def("unwords", "[String] -> String", "join with single spaces",
      [a](PrimCall& c) { return Value::string(joined(a(c, 0), " ", false)); });
  def("lines", "String -> [String]", "split on newlines", [a](PrimCall& c) {
    std::vector<std::string> parts;
    const auto& s = a(c, 0).as_string();
    std::size_t start = 0;
    while (start < s.size()) {
      std::size_t nl = s.find('\n', start);
      if (nl == std::string::npos) nl = s.size();
      parts.push_back(s.substr(start, nl - start));
      start = nl + 1;
    }
    return string_list(parts);
  });
  def("unlines", "[String] -> String", "join, terminating each line with a newline",
      [a](PrimCall& c) { return Value::string(joined(a(c, 0), "\n", true)); });
  def("toUpper", "String -> String", "ASCII upper case", [a](PrimCall& c) {
    std::string s = a(c, 0).as_string();
    for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return Value::string(std::move(s));
  });
  def("toLower", "String -> String", "ASCII lower case", [a](PrimCall& c) {
    std::string s = a(c, 0).as_string();
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return Value::string(std::move(s));
  });
  def("isInfixOf", "String -> String -> Bool", "whether the first string occurs in the second",
      [a](PrimCall& c) {
        return Value::boolean(a(c, 1).as_string().find(a(c, 0).as_string()) != std::string::npos);
      });
  def("isPrefixOf", "String -> String -> Bool", "whether the first string starts the second",
      [a](PrimCall& c) {
        return Value::boolean(a(c, 1).as_string().rfind(a(c, 0).as_string(), 0) == 0);
      });
  def("trim", "String -> String", "strip surrounding whitespace", [a](PrimCall& c) {
    const auto& s = a(c, 0).as_string();
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return Value::string("");
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return Value::string(s.substr(b, e - b + 1));
  });
  def("extractBetween", "String -> String -> String -> String",
      "text between the first start marker and the following end marker, or \"\"",
      [a](PrimCall& c) {
        const auto& open = a(c, 0).as_string();
        const auto& close = a(c, 1).as_string();
        const auto& s = a(c, 2).as_string();
        std::size_t b = s.find(open);
        if (b == std::string::npos) return Value::string("");
        b += open.size();
        std::size_t e = s.find(close, b);
        if (e == std::string::npos) return Value::string("");
        return Value::string(s.substr(b, e - b));
      });
  def("chunksOf", "Int -> String -> [String]", "split text into pieces of at most n bytes",
      [a](PrimCall& c) {
        std::size_t n = std::max<std::size_t>(1, to_count(a(c, 0).as_int()));
        const auto& s = a(c, 1).as_string();
        std::vector<std::string> parts;
        for (std::size_t i = 0; i < s.size(); i += n) parts.push_back(s.substr(i, n));
        check_list_size(parts.size());
        return string_list(parts);
      });

  // effect-polymorphic combinators: they run inside whatever context executes them
  TypeP va = t_var("a"), vb = t_var("b"), ve = t_var("e");
  add_primitive(make_prim(
      "mapM", close_over(t_arrows({t_arrow(va, t_effect_over(ve, vb)), t_list(va)},
                                  t_effect_over(ve, t_list(vb)))),
      "run an action for every element, collecting results", [](PrimCall& c) {
        Value f = c.args[0], xs = c.args[1];
        return make_host_thunk("", "mapM", [f, xs](Interp& in, EffectContext& ctx) {
          Value::List out;
          for (const auto& x : xs.as_list()) out.push_back(in.run(in.apply(f, x), ctx));
          return Value::list(std::move(out));
        });
      }));
  add_primitive(make_prim(
      "mapM_", close_over(t_arrows({t_arrow(va, t_effect_over(ve, vb)), t_list(va)},
                                   t_effect_over(ve, t_unit()))),
      "run an action for every element, discarding results", [](PrimCall& c) {
        Value f = c.args[0], xs = c.args[1];
        return make_host_thunk("", "mapM_", [f, xs](Interp& in, EffectContext& ctx) {
          for (const auto& x : xs.as_list()) in.run(in.apply(f, x), ctx);
          return Value::unit();
        });
      }));
  add_primitive(make_prim(
      "when", close_over(t_arrows({t_bool(), t_effect_over(ve, t_unit())}, t_effect_over(ve, t_unit()))),
      "run the action only if the condition holds", [](PrimCall& c) {
        Value cond = c.args[0], act = c.args[1];
        return make_host_thunk("", "when", [cond, act](Interp& in, EffectContext& ctx) {
          if (cond.as_bool()) in.run(act, ctx);
          return Value::unit();
        });
      }));

  add_primitive(make_prim(
      kAgentName, close_over(t_arrows({t_opaque(kDefsTag), t_string()}, t_var("t"))),
      "generate, type-check, and run a program for the prompt at the expected type",
      [](PrimCall& c) -> Value {
        if (!c.agent_target || !*c.agent_target) {
          throw RuntimeFault(RuntimeFault::Kind::Internal, "agent call without a resolved target");
        }
        AgentHost* host = c.interp.agents();
        if (!host) throw EffectError("AgentUnavailable", "no agent runtime is attached");
        return host->run_agent(c.interp, c.ctx, c.args[0], c.args[1].as_string(), *c.agent_target);
      }));
}

}  // namespace lbac
