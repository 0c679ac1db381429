#include "optrot/hessian/spectrum.hpp"

#include "optrot/diag/diagnostics.hpp"
#include "optrot/error.hpp"
#include "optrot/parallel.hpp"
#include "optrot/tensor/hadamard.hpp"
#include "optrot/tensor/ldl.hpp"
#include "optrot/tensor/random.hpp"
#include "optrot/tensor/symmetric_eigen.hpp"

#include <cmath>
#include <sstream>

namespace optrot {

const char* spectrum_name(SpectrumKind k) {
  return k == SpectrumKind::kPolynomial ? "polynomial" : "lowrank";
}

const char* eigenbasis_name(Eigenbasis b) {
  switch (b) {
    case Eigenbasis::kHadamard: return "hadamard";
    case Eigenbasis::kRandom: return "random";
    case Eigenbasis::kIdentity: return "identity";
  }
  return "?";
}

SpectrumKind parse_spectrum(const std::string& name) {
  if (name == "polynomial") return SpectrumKind::kPolynomial;
  if (name == "lowrank" || name == "low-rank") return SpectrumKind::kLowRank;
  throw InvalidArgument("unknown spectrum '" + name + "'");
}

Eigenbasis parse_eigenbasis(const std::string& name) {
  if (name == "hadamard") return Eigenbasis::kHadamard;
  if (name == "random") return Eigenbasis::kRandom;
  if (name == "identity") return Eigenbasis::kIdentity;
  throw InvalidArgument("unknown eigenbasis '" + name + "'");
}

void SpectrumSpec::validate() const {
  if (n == 0) throw InvalidArgument("spectrum dimension must be positive");
  if (basis == Eigenbasis::kHadamard && !is_power_of_two(n)) {
    throw InvalidArgument("Hadamard eigenbasis needs a power-of-two dimension, got " +
                          std::to_string(n));
  }
  if (!std::isfinite(exponent)) throw InvalidArgument("spectrum exponent must be finite");
  if (spectrum == SpectrumKind::kLowRank && rank == 0) {
    throw InvalidArgument("low-rank spectrum needs rank >= 1");
  }
}

SpectrumHessian build_spectrum_hessian(const SpectrumSpec& spec) {
  spec.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(spec.n);
  SpectrumHessian out;
  out.lambdas.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool kept = spec.spectrum == SpectrumKind::kPolynomial ||
                      static_cast<std::size_t>(i) < spec.rank;
    out.lambdas(i) = kept ? std::pow(static_cast<double>(i + 1), spec.exponent) : 0.0;
  }
  switch (spec.basis) {
    case Eigenbasis::kHadamard: out.q = hadamard_orthonormal(spec.n); break;
    case Eigenbasis::kRandom: out.q = random_orthogonal(spec.n, spec.seed); break;
    case Eigenbasis::kIdentity: out.q = Matrix::Identity(n, n); break;
  }
  out.h = out.q * out.lambdas.asDiagonal() * out.q.transpose();
  out.h = 0.5 * (out.h + out.h.transpose()).eval();
  return out;
}

double incoherence_trace_bound(const Matrix& q, const Vector& lambdas) {
  const double n = static_cast<double>(q.rows());
  const double mu = std::sqrt(n) * max_abs(q);
  const double ts = lambdas.cwiseMax(0.0).cwiseSqrt().sum();
  return mu * mu * ts * ts / n;
}

namespace {

struct GridPoint {
  std::size_t n;
  SpectrumKind spectrum;
  Eigenbasis basis;
  std::uint64_t seed;
};

BoundsRow evaluate(const GridPoint& p, const BoundsGrid& grid) {
  SpectrumSpec spec;
  spec.n = p.n;
  spec.spectrum = p.spectrum;
  spec.exponent = grid.exponent;
  spec.rank = grid.rank;
  spec.basis = p.basis;
  spec.seed = p.seed;
  const SpectrumHessian sh = build_spectrum_hessian(spec);
  const SymmetricPsd h(sh.h);
  BoundsRow row;
  row.n = p.n;
  row.spectrum = p.spectrum;
  row.basis = p.basis;
  row.seed = p.seed;
  row.tr_h = h.trace();
  row.tr_d = ldl_upper(h).trace_d();
  row.ub = ub_bound(h);
  row.inc_bound_true_q = incoherence_trace_bound(sh.q, sh.lambdas);
  const EigenDecomposition eig = jacobi_eigh(h);
  row.inc_bound_recomputed_q = incoherence_trace_bound(eig.q, eig.lambdas);
  return row;
}

}  // namespace

std::vector<BoundsRow> bounds_experiment(const BoundsGrid& grid, int threads) {
  if (grid.seeds == 0) throw InvalidArgument("bounds experiment needs at least one seed");
  for (std::size_t n : grid.ns) {
    if (!is_power_of_two(n)) {
      throw InvalidArgument("bounds experiment dimensions must be powers of two");
    }
  }
  // Seed-independent points are evaluated once.
  std::vector<GridPoint> points;
  std::vector<std::size_t> point_of_row;
  for (std::size_t n : grid.ns) {
    for (SpectrumKind s : grid.spectra) {
      for (Eigenbasis b : grid.bases) {
        const bool seeded = b == Eigenbasis::kRandom;
        const std::size_t first = points.size();
        for (std::size_t k = 0; k < grid.seeds; ++k) {
          if (seeded || k == 0) points.push_back({n, s, b, grid.base_seed + k});
          point_of_row.push_back(seeded ? first + k : first);
        }
      }
    }
  }
  std::vector<BoundsRow> computed(points.size());
  parallel_for(points.size(), threads,
               [&](std::size_t i) { computed[i] = evaluate(points[i], grid); });
  std::vector<BoundsRow> rows;
  rows.reserve(point_of_row.size());
  for (std::size_t r = 0; r < point_of_row.size(); ++r) {
    BoundsRow row = computed[point_of_row[r]];
    row.seed = grid.base_seed + r % grid.seeds;
    rows.push_back(row);
  }
  return rows;
}

std::string bounds_csv(const std::vector<BoundsRow>& rows) {
  std::ostringstream out;
  out << "n,spectrum,basis,seed,tr_h,tr_d,ub,inc_bound_true_q,inc_bound_recomputed_q\n";
  for (const BoundsRow& r : rows) {
    out << r.n << ',' << spectrum_name(r.spectrum) << ',' << eigenbasis_name(r.basis) << ','
        << r.seed << ',' << format_double(r.tr_h) << ',' << format_double(r.tr_d) << ','
        << format_double(r.ub) << ',' << format_double(r.inc_bound_true_q) << ','
        << format_double(r.inc_bound_recomputed_q) << '\n';
  }
  return out.str();
}

}  // namespace optrot
