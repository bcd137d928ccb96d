#pragma once

#include <stdexcept>
#include <string>

namespace msbasis {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Fine mesh is not nested in the coarse mesh (nf not divisible by nc).
class NonNestedMesh : public Error {
 public:
  using Error::Error;
};

/// Mesh parameters below the smallest admissible sizes.
class DegenerateMesh : public Error {
 public:
  using Error::Error;
};

/// A sampled coefficient value violates ellipticity (value <= 0).
class NonPositiveCoefficient : public Error {
 public:
  using Error::Error;
};

/// A symmetric factorization did not succeed (matrix not SPD as expected).
class FactorizationFailure : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix sizes do not match the grid they claim to live on.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A stored basis does not match the grid/coefficient it is used with.
class ProvenanceMismatch : public Error {
 public:
  using Error::Error;
};

/// The coarse Galerkin system is singular beyond what pruning can repair.
class SingularCoarseSystem : public Error {
 public:
  using Error::Error;
};

/// Relative error is undefined: reference norm is zero but candidate is not.
class ZeroReference : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration file or command-line arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace msbasis
