#pragma once

#include "optrot/tensor/matrix.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace optrot {

enum class SpectrumKind { kPolynomial, kLowRank };
enum class Eigenbasis { kHadamard, kRandom, kIdentity };

const char* spectrum_name(SpectrumKind k);
const char* eigenbasis_name(Eigenbasis b);
SpectrumKind parse_spectrum(const std::string& name);
Eigenbasis parse_eigenbasis(const std::string& name);

struct SpectrumSpec {
  std::size_t n = 16;
  SpectrumKind spectrum = SpectrumKind::kPolynomial;
  double exponent = 1.5;
  std::size_t rank = 10;  // low-rank only
  Eigenbasis basis = Eigenbasis::kHadamard;
  std::uint64_t seed = 0;  // random basis only

  void validate() const;
};

struct SpectrumHessian {
  Matrix h;
  Matrix q;  // columns are the construction eigenvectors
  Vector lambdas;  // lambda_i = i^exponent, zero beyond rank
};

// H = Q diag(lambda) Q^T.
SpectrumHessian build_spectrum_hessian(const SpectrumSpec& spec);

struct BoundsRow {
  std::size_t n = 0;
  SpectrumKind spectrum = SpectrumKind::kPolynomial;
  Eigenbasis basis = Eigenbasis::kHadamard;
  std::uint64_t seed = 0;
  double tr_h = 0.0;
  double tr_d = 0.0;
  double ub = 0.0;
  double inc_bound_true_q = 0.0;        // mu_H from the construction Q
  double inc_bound_recomputed_q = 0.0;  // mu_H from eigenvectors recomputed from H
};

struct BoundsGrid {
  std::vector<std::size_t> ns = {16, 64, 256};
  std::vector<SpectrumKind> spectra = {SpectrumKind::kPolynomial, SpectrumKind::kLowRank};
  std::vector<Eigenbasis> bases = {Eigenbasis::kHadamard, Eigenbasis::kRandom,
                                   Eigenbasis::kIdentity};
  double exponent = 1.5;
  std::size_t rank = 10;
  std::size_t seeds = 20;
  std::uint64_t base_seed = 0;
};

// Incoherence bound mu_H^2 tr(H^{1/2})^2 / n for a given eigenvector matrix.
double incoherence_trace_bound(const Matrix& q, const Vector& lambdas);

// One row per (n, spectrum, basis, seed), in that nesting order. Bases that
// do not depend on the seed are computed once and repeated per seed.
std::vector<BoundsRow> bounds_experiment(const BoundsGrid& grid, int threads = 1);

std::string bounds_csv(const std::vector<BoundsRow>& rows);

}  // namespace optrot
