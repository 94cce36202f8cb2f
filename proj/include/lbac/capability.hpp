#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lbac/library.hpp"

namespace lbac {

enum class FileKind { Missing, Regular, Directory, Symlink, Other };

/// Host filesystem boundary used by the RIO primitives.
class HostFs {
 public:
  virtual ~HostFs() = default;
  virtual FileKind kind(const std::string& path) = 0;  // does not follow a final symlink
  virtual std::string read_link(const std::string& path) = 0;
  virtual std::string read_file(const std::string& path) = 0;
  virtual void write_file(const std::string& path, const std::string& contents) = 0;
  virtual std::vector<std::string> list_dir(const std::string& path) = 0;
};

class RealHostFs : public HostFs {
 public:
  FileKind kind(const std::string& path) override;
  std::string read_link(const std::string& path) override;
  std::string read_file(const std::string& path) override;
  void write_file(const std::string& path, const std::string& contents) override;
  std::vector<std::string> list_dir(const std::string& path) override;
};

struct FsAccess {
  std::string op;
  std::string path;
  bool allowed;
};

/// Records every host call; `allowed` is whether the path lies under `root`.
class AuditingHostFs : public HostFs {
 public:
  AuditingHostFs(std::shared_ptr<HostFs> inner, std::string root)
      : inner_(std::move(inner)), root_(std::move(root)) {}
  FileKind kind(const std::string& path) override;
  std::string read_link(const std::string& path) override;
  std::string read_file(const std::string& path) override;
  void write_file(const std::string& path, const std::string& contents) override;
  std::vector<std::string> list_dir(const std::string& path) override;

  const std::vector<FsAccess>& log() const { return log_; }
  /// One JSON object per line: {"op", "path", "allowed"}.
  std::string to_jsonl() const;

 private:
  void record(const char* op, const std::string& path);
  std::shared_ptr<HostFs> inner_;
  std::string root_;
  std::vector<FsAccess> log_;
};

/// True when `path` equals `root` or lies beneath it, compared lexically.
bool lexically_within(const std::string& path, const std::string& root);

class RioState : public EffectState {
 public:
  RioState(std::string r, std::shared_ptr<HostFs> f) : root(std::move(r)), fs(std::move(f)) {}
  std::string root;  // canonical absolute directory
  std::shared_ptr<HostFs> fs;
};

/// Registers Path, the RIO effect (getRoot, //, readRIO, writeRIO, ls),
/// pathName, the IO-level `evalRIO`, and the `rioLib` Defs.
/// RIO options: {"root": dir}.
void install_capability(Library& lib);

/// Canonical root for a session; throws EffectError(NoSuchRoot).
std::string canonical_root(const std::string& root);
/// Capability for the session root.
Value root_capability(const RioState& st);
/// Resolved absolute path behind a capability, for tests and audits.
std::string capability_path(const Value& cap);

/// Runs a checked RIO program against `root`. A `Path -> RIO T` program is
/// applied to the root capability first.
Value eval_rio(const Library& lib, Interp& interp, const CertificateP& cert, const std::string& root,
               std::shared_ptr<HostFs> fs = nullptr);

}  // namespace lbac
