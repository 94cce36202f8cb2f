#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace lbac::testing {

inline std::filesystem::path source_dir() { return LBAC_SOURCE_DIR; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct CorpusProgram {
  std::string name;
  std::string expect;
  std::string source;
};

/// Programs under corpus/<kind>, each starting with `-- expect: <type>`.
inline std::vector<CorpusProgram> load_corpus(const std::string& kind) {
  std::vector<CorpusProgram> out;
  for (const auto& e : std::filesystem::directory_iterator(source_dir() / "corpus" / kind)) {
    if (e.path().extension() != ".lbac") continue;
    std::string src = slurp(e.path());
    std::string first = src.substr(0, src.find('\n'));
    const std::string tag = "-- expect: ";
    out.push_back({e.path().stem().string(), first.rfind(tag, 0) == 0 ? first.substr(tag.size()) : "", src});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "lbac-XXXXXX").string();
    path_ = ::mkdtemp(tmpl.data());
    path_ = std::filesystem::canonical(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace lbac::testing
