#include "lbac/provenance.hpp"

#include <algorithm>
#include <fstream>

namespace lbac {

namespace {

constexpr const char* kDoiTag = "DOI";
constexpr const char* kTrustedTag = "Trusted";

class DoiPayload : public OpaquePayload {
 public:
  DoiPayload(std::string d, std::string s) : doi(std::move(d)), store_id(std::move(s)) {}
  bool equals(const OpaquePayload& other) const override {
    const auto* p = dynamic_cast<const DoiPayload*>(&other);
    return p && p->doi == doi && p->store_id == store_id;
  }
  std::string show() const override { return doi; }
  std::string doi;
  std::string store_id;
};

class TrustedBibPayload : public OpaquePayload {
 public:
  TrustedBibPayload(BibEntry e, std::string s, std::uint64_t n)
      : entry(std::move(e)), store_id(std::move(s)), fetch_seq(n) {}
  bool equals(const OpaquePayload& other) const override {
    const auto* p = dynamic_cast<const TrustedBibPayload*>(&other);
    return p && p->entry.doi == entry.doi && p->store_id == store_id;
  }
  std::string show() const override { return entry.bibtex; }
  BibEntry entry;
  std::string store_id;
  std::uint64_t fetch_seq;
};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Relative, non-empty, no `..` segment, no NUL.
bool confined_relative(const std::string& p) {
  if (p.empty() || p.find('\0') != std::string::npos) return false;
  std::filesystem::path path(p);
  if (path.is_absolute() || path.has_root_name() || path.has_root_directory()) return false;
  for (const auto& seg : path) {
    if (seg == "..") return false;
  }
  return true;
}

const TrustedBibPayload& trusted(const Value& v) { return v.payload<TrustedBibPayload>(kTrustedTag); }

}  // namespace

std::shared_ptr<const BibStore> BibStore::from_json(const nlohmann::json& j, std::string id) {
  if (!j.is_array()) throw ConfigError("bibliography fixture must be a JSON array");
  auto store = std::make_shared<BibStore>();
  store->id_ = std::move(id);
  for (const auto& item : j) {
    try {
      BibEntry e{item.at("doi").get<std::string>(), item.at("title").get<std::string>(),
                 item.at("year").get<long long>(), item.at("bibtex").get<std::string>()};
      if (!store->entries_.emplace(e.doi, e).second) {
        throw ConfigError("duplicate DOI " + e.doi + " in bibliography fixture");
      }
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(std::string("malformed bibliography entry: ") + ex.what());
    }
  }
  return store;
}

std::shared_ptr<const BibStore> BibStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open bibliography fixture " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("bibliography fixture " + path + ": " + ex.what());
  }
  return from_json(j, "fixture:" + std::filesystem::path(path).filename().string());
}

const BibEntry* BibStore::find(const std::string& doi) const {
  auto it = entries_.find(doi);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> BibStore::search(const std::string& query) const {
  std::vector<std::string> tokens;
  {
    std::string q = lower(query), cur;
    for (char c : q + " ") {
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!cur.empty()) tokens.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
  }
  std::vector<std::string> out;
  for (const auto& [doi, e] : entries_) {
    std::string hay = lower(e.title) + "\n" + lower(e.bibtex);
    bool all = std::all_of(tokens.begin(), tokens.end(),
                           [&](const std::string& t) { return hay.find(t) != std::string::npos; });
    if (all) out.push_back(doi);
  }
  return out;
}

std::optional<std::string> doi_of(const Value& v) {
  if (!v.is_opaque() || v.as_opaque().tag != kDoiTag) return std::nullopt;
  return v.payload<DoiPayload>(kDoiTag).doi;
}

std::optional<BibEntry> trusted_entry(const Value& v) {
  if (!v.is_opaque() || v.as_opaque().tag != kTrustedTag) return std::nullopt;
  return trusted(v).entry;
}

std::optional<std::string> trusted_store_id(const Value& v) {
  if (!v.is_opaque() || v.as_opaque().tag != kTrustedTag) return std::nullopt;
  return trusted(v).store_id;
}

std::vector<AuditViolation> audit_bib_text(const std::string& contents, const BibStore& store) {
  std::vector<std::string> blocks;
  for (const auto& [doi, e] : store.entries()) blocks.push_back(e.bibtex + "\n");
  std::sort(blocks.begin(), blocks.end(),
            [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
  std::vector<AuditViolation> out;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto hit = std::find_if(blocks.begin(), blocks.end(), [&](const std::string& b) {
      return contents.compare(pos, b.size(), b) == 0;
    });
    if (hit != blocks.end()) {
      pos += hit->size();
      continue;
    }
    std::size_t next = contents.find("\n@", pos);
    std::size_t end = next == std::string::npos ? contents.size() : next + 1;
    out.push_back({pos, contents.substr(pos, std::min<std::size_t>(end - pos, 80))});
    pos = end;
  }
  return out;
}

void install_provenance(Library& lib) {
  lib.register_opaque(kDoiTag, 0);
  lib.register_opaque("Bib", 0);
  lib.register_opaque(kTrustedTag, 1);

  const TypeRegistry& reg = lib.registry();
  lib.register_effect("BibIO", {}, [](const nlohmann::json& options) {
    if (!options.contains("fixture")) throw ConfigError("BibIO needs a `fixture` option");
    return std::make_shared<BibState>(BibStore::load(options.at("fixture").get<std::string>()),
                                      options.value("outdir", std::string(".")));
  });
  std::vector<PrimitiveP> prims;
  prims.push_back(make_prim(reg, "dblpSearch", "String -> BibIO [DOI]",
                            "DOIs of papers matching a query", [](PrimCall& c) {
    auto& st = c.ctx->state_as<BibState>();
    c.interp.note_host_effect();
    Value::List out;
    for (const auto& doi : st.store->search(c.args[0].as_string())) {
      out.push_back(Value::opaque(kDoiTag, std::make_shared<DoiPayload>(doi, st.store->id())));
    }
    return Value::list(std::move(out));
  }));
  prims.push_back(make_prim(reg, "dblpFetchBib", "DOI -> BibIO (Trusted Bib)",
                            "fetch the BibTeX entry for a DOI", [](PrimCall& c) {
    auto& st = c.ctx->state_as<BibState>();
    c.interp.note_host_effect();
    const auto& doi = c.args[0].payload<DoiPayload>(kDoiTag);
    const BibEntry* e = st.store->find(doi.doi);
    if (!e || doi.store_id != st.store->id()) {
      throw EffectError("UnknownDoi", "no entry for " + doi.doi + " in this store");
    }
    return Value::opaque(kTrustedTag,
                         std::make_shared<TrustedBibPayload>(*e, st.store->id(), ++st.fetches));
  }));
  prims.push_back(make_prim(reg, "appendToBibFile", "FilePath -> Trusted Bib -> BibIO ()",
                            "append a fetched entry to a bibliography file", [](PrimCall& c) {
    auto& st = c.ctx->state_as<BibState>();
    const std::string& rel = c.args[0].as_string();
    if (!confined_relative(rel)) {
      throw EffectError("PathEscape", "path `" + rel + "` leaves the output directory");
    }
    const auto& t = trusted(c.args[1]);
    c.interp.note_host_effect();
    std::ofstream out(st.outdir / rel, std::ios::binary | std::ios::app);
    if (!out || !(out << t.entry.bibtex << '\n')) {
      throw EffectError("IoFailure", "cannot append to " + rel);
    }
    return Value::unit();
  }));

  for (auto& p : prims) lib.add_primitive(std::move(p));

  lib.add_primitive(make_prim(reg, "getDate", "Trusted Bib -> Int", "publication year",
                              [](PrimCall& c) { return Value::integer(trusted(c.args[0]).entry.year); }));
  lib.add_primitive(make_prim(reg, "getTitle", "Trusted Bib -> String", "paper title",
                              [](PrimCall& c) { return Value::string(trusted(c.args[0]).entry.title); }));
  lib.add_primitive(make_prim(reg, "doiText", "DOI -> String", "the DOI as text",
                              [](PrimCall& c) { return Value::string(c.args[0].payload<DoiPayload>(kDoiTag).doi); }));

  lib.add_defs(lib.make_defs("bibLib", {"dblpSearch", "dblpFetchBib", "appendToBibFile", "getDate",
                                        "getTitle", "doiText"}));
}

}  // namespace lbac
