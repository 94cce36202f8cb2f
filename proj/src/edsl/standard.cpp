#include "lbac/standard.hpp"

namespace lbac {

std::shared_ptr<Library> standard_library() {
  auto lib = std::make_shared<Library>();
  install_provenance(*lib);
  install_capability(*lib);
  install_ifc(*lib);
  lib->add_defs(lib->make_defs("mathDefs", {}));
  return lib;
}

std::shared_ptr<Library> unprotected_messaging_library() {
  auto lib = std::make_shared<Library>();
  install_ifc(*lib, IfcOptions{"IO", false});
  return lib;
}

}  // namespace lbac
