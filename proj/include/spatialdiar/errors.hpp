#pragma once

#include <stdexcept>
#include <string>

namespace spatialdiar {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: wrong shapes, out-of-range parameters, invalid configuration.
// The CLI maps this to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A speaker has no frames in which it is the only active speaker.
class NoDominantFrames : public Error {
 public:
  NoDominantFrames(std::size_t speaker, const std::string& what)
      : Error(what), speaker_(speaker) {}
  std::size_t speaker() const { return speaker_; }

 private:
  std::size_t speaker_;
};

// Simplex vertices could not be resolved: duplicate vertex frames or an
// ill-conditioned vertex matrix.
class VertexDegeneracy : public Error {
 public:
  VertexDegeneracy(double condition_number, const std::string& what)
      : Error(what), condition_number_(condition_number) {}
  double condition_number() const { return condition_number_; }

 private:
  double condition_number_;
};

}  // namespace spatialdiar
