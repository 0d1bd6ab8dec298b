#include "maskrisk/rng.hpp"

#include "maskrisk/error.hpp"

namespace maskrisk {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NonPositiveDefinite: return "NonPositiveDefinite";
    case ErrorCode::MissingSpike: return "MissingSpike";
    case ErrorCode::EigendecompositionUnavailable: return "EigendecompositionUnavailable";
    case ErrorCode::EmptyTargetSet: return "EmptyTargetSet";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::AtPhaseTransition: return "AtPhaseTransition";
    case ErrorCode::NoSolution: return "NoSolution";
    case ErrorCode::BracketExhausted: return "BracketExhausted";
    case ErrorCode::SingularConditioning: return "SingularConditioning";
    case ErrorCode::NotAnEigenvector: return "NotAnEigenvector";
    case ErrorCode::TooManySkips: return "TooManySkips";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
  }
  return "Unknown";
}

double Rng::gamma(double shape) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(engine_);
}

double Rng::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

Matrix Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  Matrix out(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal();
  return out;
}

Vector Rng::normal_vector(Eigen::Index size) {
  Vector out(size);
  for (Eigen::Index i = 0; i < size; ++i) out[i] = normal();
  return out;
}

Vector Rng::uniform_vector(Eigen::Index size) {
  Vector out(size);
  for (Eigen::Index i = 0; i < size; ++i) out[i] = uniform();
  return out;
}

std::uint64_t hash_tag(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view experiment_id,
                          std::uint64_t p_index, std::uint64_t rep_index) noexcept {
  std::uint64_t h = mix64(master_seed ^ 0x6d61736b7269736bULL);
  h = mix64(h ^ hash_tag(experiment_id));
  h = mix64(h ^ p_index);
  h = mix64(h ^ rep_index);
  return h;
}

}  // namespace maskrisk
