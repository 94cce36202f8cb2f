#include "lbac/capability.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <deque>
#include <filesystem>

namespace lbac {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPathTag = "Path";
constexpr int kMaxSymlinkHops = 40;

class PathPayload : public OpaquePayload {
 public:
  PathPayload(std::string r, std::string res) : root(std::move(r)), resolved(std::move(res)) {}
  bool equals(const OpaquePayload& other) const override {
    const auto* p = dynamic_cast<const PathPayload*>(&other);
    return p && p->root == root && p->resolved == resolved;
  }
  std::string show() const override { return relative(); }
  std::string relative() const {
    if (resolved == root) return ".";
    return resolved.substr(root == "/" ? 1 : root.size() + 1);
  }
  std::string root;
  std::string resolved;
};

Value make_cap(const std::string& root, const std::string& resolved) {
  return Value::opaque(kPathTag, std::make_shared<PathPayload>(root, resolved));
}

const PathPayload& cap_of(const Value& v) { return v.payload<PathPayload>(kPathTag); }

std::string join(const std::string& dir, const std::string& name) {
  return dir == "/" ? "/" + name : dir + "/" + name;
}

std::string parent_of(const std::string& p) {
  auto slash = p.rfind('/');
  return slash == 0 ? "/" : p.substr(0, slash);
}

std::vector<std::string> segments(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + "/") {
    if (c == '/') {
      if (!cur.empty() && cur != ".") out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

[[noreturn]] void escape(const std::string& what) { throw EffectError("CapabilityEscape", what); }

// Resolves `rel` beneath `start`, following every symlink, never leaving `root`.
std::string resolve(HostFs& host, const std::string& root, const std::string& start,
                    const std::string& rel) {
  if (!rel.empty() && rel.front() == '/') escape("absolute path `" + rel + "` given to //");
  if (rel.find('\0') != std::string::npos) escape("path contains NUL");
  std::deque<std::string> todo;
  for (auto& s : segments(rel)) todo.push_back(std::move(s));
  std::string cur = start;
  int hops = 0;
  while (!todo.empty()) {
    std::string seg = std::move(todo.front());
    todo.pop_front();
    if (seg == "..") {
      if (cur == root) escape("`" + rel + "` climbs above the capability root");
      cur = parent_of(cur);
      continue;
    }
    std::string cand = join(cur, seg);
    FileKind k = host.kind(cand);
    if (k == FileKind::Symlink) {
      if (++hops > kMaxSymlinkHops) {
        throw EffectError("ResolutionFailure", "too many symbolic links resolving `" + rel + "`");
      }
      std::string target = host.read_link(cand);
      auto more = segments(target);
      if (!target.empty() && target.front() == '/') {
        std::string norm = fs::path(target).lexically_normal().string();
        if (norm.size() > 1 && norm.back() == '/') norm.pop_back();
        if (!lexically_within(norm, root)) {
          escape("symbolic link `" + seg + "` points outside the capability root");
        }
        cur = root;
        more = segments(norm.substr(root == "/" ? 0 : root.size()));
      }
      todo.insert(todo.begin(), more.begin(), more.end());
      continue;
    }
    if (k == FileKind::Missing && !todo.empty()) {
      throw EffectError("ResolutionFailure", "`" + seg + "` does not exist while resolving `" + rel + "`");
    }
    cur = std::move(cand);
  }
  return cur;
}

// Use-time check: the capability still resolves to the same place.
std::string reverify(HostFs& host, const PathPayload& p) {
  std::string again = resolve(host, p.root, p.root, p.resolved == p.root ? "" : p.relative());
  if (again != p.resolved) escape("capability `" + p.relative() + "` changed since it was issued");
  return again;
}

}  // namespace

bool lexically_within(const std::string& path, const std::string& root) {
  if (root == "/") return !path.empty() && path.front() == '/';
  return path == root || (path.size() > root.size() && path.compare(0, root.size(), root) == 0 &&
                          path[root.size()] == '/');
}

FileKind RealHostFs::kind(const std::string& path) {
  struct stat st;
  if (::lstat(path.c_str(), &st) != 0) {
    if (errno == ENOENT) return FileKind::Missing;
    throw EffectError("ResolutionFailure", "cannot stat " + path + ": " + std::strerror(errno));
  }
  if (S_ISLNK(st.st_mode)) return FileKind::Symlink;
  if (S_ISDIR(st.st_mode)) return FileKind::Directory;
  if (S_ISREG(st.st_mode)) return FileKind::Regular;
  return FileKind::Other;
}

std::string RealHostFs::read_link(const std::string& path) {
  std::error_code ec;
  auto target = fs::read_symlink(path, ec);
  if (ec) throw EffectError("ResolutionFailure", "cannot read link " + path + ": " + ec.message());
  return target.string();
}

std::string RealHostFs::read_file(const std::string& path) {
  int fd = ::open(path.c_str(), O_RDONLY | O_NOFOLLOW | O_CLOEXEC);
  if (fd < 0) throw EffectError("IoFailure", "cannot open " + path + ": " + std::strerror(errno));
  std::string out;
  char buf[65536];
  ssize_t n;
  while ((n = ::read(fd, buf, sizeof buf)) > 0) {
    out.append(buf, static_cast<std::size_t>(n));
    if (out.size() > kMaxStringBytes) {
      ::close(fd);
      throw RuntimeFault(RuntimeFault::Kind::MemoryLimit, "file " + path + " is too large");
    }
  }
  int err = errno;
  ::close(fd);
  if (n < 0) throw EffectError("IoFailure", "cannot read " + path + ": " + std::strerror(err));
  return out;
}

void RealHostFs::write_file(const std::string& path, const std::string& contents) {
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_NOFOLLOW | O_CLOEXEC, 0644);
  if (fd < 0) throw EffectError("IoFailure", "cannot open " + path + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < contents.size()) {
    ssize_t n = ::write(fd, contents.data() + done, contents.size() - done);
    if (n < 0) {
      int err = errno;
      ::close(fd);
      throw EffectError("IoFailure", "cannot write " + path + ": " + std::strerror(err));
    }
    done += static_cast<std::size_t>(n);
  }
  ::close(fd);
}

std::vector<std::string> RealHostFs::list_dir(const std::string& path) {
  std::error_code ec;
  std::vector<std::string> out;
  for (fs::directory_iterator it(path, ec), end; !ec && it != end; it.increment(ec)) {
    out.push_back(it->path().filename().string());
  }
  if (ec) throw EffectError("IoFailure", "cannot list " + path + ": " + ec.message());
  return out;
}

void AuditingHostFs::record(const char* op, const std::string& path) {
  log_.push_back(FsAccess{op, path, lexically_within(path, root_)});
}

FileKind AuditingHostFs::kind(const std::string& path) {
  record("lstat", path);
  return inner_->kind(path);
}

std::string AuditingHostFs::read_link(const std::string& path) {
  record("readlink", path);
  return inner_->read_link(path);
}

std::string AuditingHostFs::read_file(const std::string& path) {
  record("read", path);
  return inner_->read_file(path);
}

void AuditingHostFs::write_file(const std::string& path, const std::string& contents) {
  record("write", path);
  inner_->write_file(path, contents);
}

std::vector<std::string> AuditingHostFs::list_dir(const std::string& path) {
  record("list", path);
  return inner_->list_dir(path);
}

std::string AuditingHostFs::to_jsonl() const {
  std::string out;
  for (const auto& a : log_) {
    out += nlohmann::json{{"op", a.op}, {"path", a.path}, {"allowed", a.allowed}}.dump() + "\n";
  }
  return out;
}

std::string canonical_root(const std::string& root) {
  std::error_code ec;
  fs::path p = fs::canonical(root, ec);
  if (ec || !fs::is_directory(p, ec)) {
    throw EffectError("NoSuchRoot", "`" + root + "` is not an existing directory");
  }
  return p.string();
}

Value root_capability(const RioState& st) { return make_cap(st.root, st.root); }

std::string capability_path(const Value& cap) { return cap_of(cap).resolved; }

void install_capability(Library& lib) {
  lib.register_opaque(kPathTag, 0);
  const TypeRegistry& reg = lib.registry();
  auto state = [](PrimCall& c) -> RioState& { return c.ctx->state_as<RioState>(); };

  lib.register_effect("RIO", {}, [](const nlohmann::json& options) {
    if (!options.contains("root")) throw ConfigError("RIO needs a `root` option");
    return std::make_shared<RioState>(canonical_root(options.at("root").get<std::string>()),
                                      std::make_shared<RealHostFs>());
  });
  std::vector<PrimitiveP> prims;
  prims.push_back(make_prim(reg, "getRoot", "RIO Path", "capability for the granted root",
                            [state](PrimCall& c) { return root_capability(state(c)); }));
  prims.push_back(make_prim(reg, "//", "Path -> String -> RIO Path",
                            "narrow a capability to a path beneath it", [state](PrimCall& c) {
    RioState& st = state(c);
    const auto& p = cap_of(c.args[0]);
    if (p.root != st.root) escape("capability belongs to a different root");
    c.interp.note_host_effect();
    return make_cap(st.root, resolve(*st.fs, st.root, p.resolved, c.args[1].as_string()));
  }));
  prims.push_back(make_prim(reg, "readRIO", "Path -> RIO String", "read a whole file",
                            [state](PrimCall& c) {
    RioState& st = state(c);
    const auto& p = cap_of(c.args[0]);
    if (p.root != st.root) escape("capability belongs to a different root");
    c.interp.note_host_effect();
    return Value::string(st.fs->read_file(reverify(*st.fs, p)));
  }));
  prims.push_back(make_prim(reg, "writeRIO", "Path -> String -> RIO ()",
                            "replace a file's contents", [state](PrimCall& c) {
    RioState& st = state(c);
    const auto& p = cap_of(c.args[0]);
    if (p.root != st.root) escape("capability belongs to a different root");
    c.interp.note_host_effect();
    st.fs->write_file(reverify(*st.fs, p), c.args[1].as_string());
    return Value::unit();
  }));
  prims.push_back(make_prim(reg, "ls", "Path -> RIO [Path]", "children of a directory, by name",
                            [state](PrimCall& c) {
    RioState& st = state(c);
    const auto& p = cap_of(c.args[0]);
    if (p.root != st.root) escape("capability belongs to a different root");
    c.interp.note_host_effect();
    std::string dir = reverify(*st.fs, p);
    FileKind k = st.fs->kind(dir);
    if (k != FileKind::Directory) throw EffectError("NotADirectory", p.relative() + " is not a directory");
    auto names = st.fs->list_dir(dir);
    std::sort(names.begin(), names.end());
    Value::List out;
    for (const auto& n : names) {
      try {
        out.push_back(make_cap(st.root, resolve(*st.fs, st.root, dir, n)));
      } catch (const EffectError& e) {
        if (e.code() != "CapabilityEscape" && e.code() != "ResolutionFailure") throw;
      }
    }
    return Value::list(std::move(out));
  }));

  for (auto& p : prims) lib.add_primitive(std::move(p));

  lib.add_primitive(make_prim(reg, "pathName", "Path -> String",
                              "the capability's path relative to its root",
                              [](PrimCall& c) { return Value::string(cap_of(c.args[0]).relative()); }));

  TypeP va = t_var("a");
  auto rio_table = lib.make_context("RIO", std::shared_ptr<EffectState>{}).primitive_table;
  lib.add_primitive(make_prim(
      "evalRIO", close_over(t_arrows({t_string(), t_effect("RIO", va)}, t_effect("IO", va))),
      "run a RIO computation with authority over one directory", [rio_table](PrimCall& c) {
        EffectContext inner{"RIO",
                            std::make_shared<RioState>(canonical_root(c.args[0].as_string()),
                                                       std::make_shared<RealHostFs>()),
                            rio_table};
        return c.interp.run(c.args[1], inner);
      }));

  lib.add_defs(lib.make_defs("rioLib", {"getRoot", "//", "readRIO", "writeRIO", "ls", "pathName"}));
}

Value eval_rio(const Library& lib, Interp& interp, const CertificateP& cert,
               const std::string& root, std::shared_ptr<HostFs> host) {
  std::string canon = canonical_root(root);
  if (!host) host = std::make_shared<RealHostFs>();
  EffectContext ctx = lib.make_context("RIO", std::make_shared<RioState>(canon, host));
  Value v = eval_pure(interp, cert, lib.value_env());
  if (cert->type()->kind == Type::Kind::Arrow) {
    v = interp.apply(v, root_capability(ctx.state_as<RioState>()));
  }
  return run_effect(interp, ctx, v);
}

}  // namespace lbac
