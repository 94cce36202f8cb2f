#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lbac/library.hpp"

namespace lbac {

struct BibEntry {
  std::string doi;
  std::string title;
  long long year = 0;
  std::string bibtex;
};

/// Read-only mock of the bibliography service.
class BibStore {
 public:
  static std::shared_ptr<const BibStore> load(const std::string& path);
  static std::shared_ptr<const BibStore> from_json(const nlohmann::json& j, std::string id);

  const std::string& id() const { return id_; }
  const BibEntry* find(const std::string& doi) const;
  /// DOIs of entries whose title or bibtex contains every query token
  /// (case-insensitive), ascending by DOI.
  std::vector<std::string> search(const std::string& query) const;
  const std::map<std::string, BibEntry>& entries() const { return entries_; }

 private:
  std::string id_;
  std::map<std::string, BibEntry> entries_;
};

class BibState : public EffectState {
 public:
  BibState(std::shared_ptr<const BibStore> s, std::filesystem::path out)
      : store(std::move(s)), outdir(std::move(out)) {}
  std::shared_ptr<const BibStore> store;
  std::filesystem::path outdir;
  std::uint64_t fetches = 0;
};

/// Registers DOI, Bib, Trusted, the BibIO effect, its primitives, and the
/// `bibLib` Defs. BibIO options: {"fixture": path, "outdir": dir}.
void install_provenance(Library& lib);

/// Read-only views for auditing and tests. They never construct values.
std::optional<std::string> doi_of(const Value& v);
std::optional<BibEntry> trusted_entry(const Value& v);
std::optional<std::string> trusted_store_id(const Value& v);

struct AuditViolation {
  std::size_t offset;
  std::string excerpt;
};

/// Splits `contents` into entry blocks greedily; every byte must belong to a
/// block equal to some store entry followed by LF.
std::vector<AuditViolation> audit_bib_text(const std::string& contents, const BibStore& store);

}  // namespace lbac
