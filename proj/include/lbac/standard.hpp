#pragma once

#include <memory>

#include "lbac/capability.hpp"
#include "lbac/ifc.hpp"
#include "lbac/library.hpp"
#include "lbac/provenance.hpp"

namespace lbac {

/// Prelude, IO, BibIO, RIO, and DC with label checks on.
std::shared_ptr<Library> standard_library();

/// The messaging API exposed under IO with label checks off, for the
/// unprotected benchmark configuration.
std::shared_ptr<Library> unprotected_messaging_library();

}  // namespace lbac
