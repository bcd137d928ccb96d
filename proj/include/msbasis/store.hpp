#pragma once

#include <string>

#include "msbasis/coefficient.hpp"
#include "msbasis/edge_basis.hpp"
#include "msbasis/mesh.hpp"

namespace msbasis {

/// Writes a basis as manifest.json + payload.bin under dir (created when
/// missing). Rewriting the same basis reproduces both files byte for byte.
void save_edge_basis(const EdgeBasisSet& basis, const std::string& dir);

/// Loads a stored basis and validates it against the live grid and
/// coefficient; throws ProvenanceMismatch when they differ and ConfigError
/// when the store is absent or malformed. Oversampling bubbles are not part
/// of the store (they depend on the right-hand side) and come back empty.
EdgeBasisSet load_edge_basis(const std::string& dir, const GridHierarchy& g,
                             const CoefficientField& field);

bool edge_basis_store_exists(const std::string& dir);

}  // namespace msbasis
