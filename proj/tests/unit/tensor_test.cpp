#include "optrot/error.hpp"
#include "optrot/tensor/archive.hpp"
#include "optrot/tensor/hadamard.hpp"
#include "optrot/tensor/ldl.hpp"
#include "optrot/tensor/random.hpp"
#include "optrot/tensor/symmetric_eigen.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

namespace optrot {
namespace {

using testing::random_psd;

TEST(Hadamard, BaseCases) {
  const Matrix h1 = hadamard_orthonormal(1);
  ASSERT_EQ(h1.rows(), 1);
  EXPECT_DOUBLE_EQ(h1(0, 0), 1.0);

  const Matrix h2 = hadamard_orthonormal(2);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_DOUBLE_EQ(h2(0, 0), r);
  EXPECT_DOUBLE_EQ(h2(0, 1), r);
  EXPECT_DOUBLE_EQ(h2(1, 0), r);
  EXPECT_DOUBLE_EQ(h2(1, 1), -r);
}

TEST(Hadamard, OrthonormalWithUnitModulusEntries) {
  const Matrix h = hadamard_orthonormal(8);
  EXPECT_LE((h * h.transpose() - Matrix::Identity(8, 8)).norm(), 1e-12);
  EXPECT_LE((h.cwiseAbs().array() - 1.0 / std::sqrt(8.0)).abs().maxCoeff(), 1e-15);
}

TEST(Hadamard, RejectsNonPowerOfTwo) {
  EXPECT_THROW(hadamard_orthonormal(0), InvalidArgument);
  EXPECT_THROW(hadamard_orthonormal(6), InvalidArgument);
  EXPECT_THROW(randomized_hadamard(12, 1), InvalidArgument);
  std::vector<double> v(3, 1.0);
  EXPECT_THROW(fwht_in_place(v), InvalidArgument);
}

TEST(RandomizedHadamard, IdentitySignsGivePlainHadamard) {
  bool found = false;
  for (std::uint64_t seed = 0; seed < 64 && !found; ++seed) {
    const auto s = random_signs(2, seed);
    if (s[0] > 0 && s[1] > 0) {
      found = true;
      EXPECT_EQ(randomized_hadamard(2, seed), hadamard_orthonormal(2));
    }
  }
  EXPECT_TRUE(found);
}

TEST(RandomizedHadamard, OrthogonalAndDeterministic) {
  for (std::size_t n : {1u, 2u, 16u, 128u}) {
    for (std::uint64_t seed : {0u, 7u, 12345u}) {
      const Matrix r = randomized_hadamard(n, seed);
      EXPECT_LE(orthogonality_defect(r), 1e-12);
      EXPECT_EQ(r, randomized_hadamard(n, seed));
    }
  }
  EXPECT_NE(randomized_hadamard(64, 1), randomized_hadamard(64, 2));
}

TEST(Fwht, SmallExamples) {
  std::vector<double> a{1.0, 0.0};
  fwht_in_place(a);
  EXPECT_NEAR(a[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(a[1], 1.0 / std::sqrt(2.0), 1e-15);

  std::vector<double> b{1.0, 1.0, 1.0, 1.0};
  fwht_in_place(b);
  const Vector dense = hadamard_orthonormal(4) * Vector::Ones(4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(b[i], dense(i), 1e-15);
  EXPECT_NEAR(b[0], 2.0, 1e-15);
  EXPECT_NEAR(b[1], 0.0, 1e-15);
}

TEST(Fwht, MatchesDenseMultiplyForAllSizes) {
  Rng rng = make_rng(3);
  for (std::size_t n = 1; n <= 1024; n *= 2) {
    const Matrix v = gaussian_matrix(n, 1, rng);
    std::vector<double> fast(v.data(), v.data() + n);
    fwht_in_place(fast);
    const Vector dense = hadamard_orthonormal(n) * v.col(0);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(fast[i], dense(i), 1e-11) << n;
  }
}

TEST(Fwht, UnnormalizedIsScaledTransform) {
  std::vector<double> v{3.0, -1.0, 2.0, 0.5, 0.0, 1.0, -2.0, 4.0};
  std::vector<double> w = v;
  fwht_in_place(v, false);
  fwht_in_place(w, true);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], w[i] * std::sqrt(8.0), 1e-12);
}

TEST(RandomOrthogonal, Examples) {
  const Matrix q1 = random_orthogonal(1, 5);
  EXPECT_DOUBLE_EQ(std::abs(q1(0, 0)), 1.0);
  const Matrix q16 = random_orthogonal(16, 5);
  EXPECT_LE(orthogonality_defect(q16), 1e-10);
  EXPECT_EQ(q16, random_orthogonal(16, 5));
  EXPECT_NE(q16, random_orthogonal(16, 6));
  EXPECT_THROW(random_orthogonal(0, 1), InvalidArgument);
}

TEST(LdlUpper, DiagonalCase) {
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 3.0;
  h(1, 1) = 5.0;
  const LdlFactors f = ldl_upper(SymmetricPsd(h));
  EXPECT_EQ(f.u, Matrix::Zero(2, 2));
  EXPECT_DOUBLE_EQ(f.d(0), 3.0);
  EXPECT_DOUBLE_EQ(f.d(1), 5.0);
}

TEST(LdlUpper, TwoByTwoHandExpansion) {
  Matrix h(2, 2);
  h << 2.0, 1.0, 1.0, 1.0;
  const LdlFactors f = ldl_upper(SymmetricPsd(h));
  EXPECT_NEAR(f.u(0, 1), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(f.u(1, 0), 0.0);
  EXPECT_NEAR(f.d(0), 1.0, 1e-15);
  EXPECT_NEAR(f.d(1), 1.0, 1e-15);
}

TEST(LdlUpper, SingularSharpnessInstance) {
  const double eps = 1e-3;
  Matrix h(2, 2);
  h << eps * eps, eps, eps, 1.0;
  const LdlFactors f = ldl_upper(SymmetricPsd(h));
  EXPECT_NEAR(f.d(0), 0.0, 1e-15);
  EXPECT_NEAR(f.d(1), 1.0, 1e-15);
  EXPECT_NEAR(f.trace_d(), 1.0, 1e-15);
  EXPECT_LE((f.reconstruct() - h).norm(), 1e-12);
}

TEST(LdlUpper, ReconstructsRandomPsd) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t n = 1 + (seed * 37) % 128;
    const SymmetricPsd h = random_psd(n, seed, seed % 3 == 0 ? n / 2 + 1 : 0);
    const LdlFactors f = ldl_upper(h);
    EXPECT_LE((f.reconstruct() - h.matrix()).norm(), 1e-8 * h.matrix().norm()) << seed;
    EXPECT_GE(f.d.minCoeff(), 0.0);
    const Matrix strict_lower = f.u.triangularView<Eigen::Lower>();
    EXPECT_EQ(strict_lower.norm(), 0.0);
  }
}

TEST(LdlUpper, IndefiniteInputReportsPivot) {
  Matrix h = Matrix::Identity(3, 3);
  h(0, 0) = -1.0;
  try {
    ldl_upper(SymmetricPsd(h));
    FAIL() << "expected FactorizationError";
  } catch (const FactorizationError& e) {
    EXPECT_EQ(e.pivot(), 0u);
    EXPECT_LT(e.value(), 0.0);
  }
}

TEST(LdlUpper, LIsInverseOfUnitFactor) {
  const SymmetricPsd h = random_psd(12, 4);
  const LdlFactors f = ldl_upper(h);
  const Matrix l = f.l();
  const Matrix should_be_d = l * h.matrix() * l.transpose();
  EXPECT_LE((should_be_d - Matrix(f.d.asDiagonal())).norm(), 1e-10);
}

TEST(SymmetricPsd, RejectsAsymmetricAndNonSquare) {
  Matrix h(2, 2);
  h << 1.0, 0.5, 0.4, 1.0;
  EXPECT_THROW(SymmetricPsd{h}, InvalidArgument);
  EXPECT_THROW(SymmetricPsd{Matrix::Zero(2, 3)}, InvalidArgument);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(SymmetricPsd{bad}, InvalidArgument);
}

TEST(SymmetricPsd, VerifyPsdTolerance) {
  Matrix h = Matrix::Identity(3, 3);
  EXPECT_NO_THROW(SymmetricPsd(h).verify_psd());
  h(2, 2) = -1e-9;  // within -1e-8 * trace
  EXPECT_NO_THROW(SymmetricPsd(h).verify_psd());
  h(2, 2) = -1e-3;
  EXPECT_THROW(SymmetricPsd(h).verify_psd(), InvalidArgument);
}

TEST(ConstrainedLdl, DiagonalIsIdentity) {
  Matrix h = Matrix::Zero(3, 3);
  h.diagonal() << 1.0, 4.0, 2.0;
  for (double c : {0.01, 1.0, 100.0}) {
    const ConstrainedLdl r = constrained_ldl(SymmetricPsd(h), c);
    EXPECT_EQ(r.l, Matrix::Identity(3, 3));
    EXPECT_DOUBLE_EQ(r.objective, 7.0);
  }
}

TEST(ConstrainedLdl, LargeCapReturnsTrueLdl) {
  Matrix h(2, 2);
  h << 2.0, 1.0, 1.0, 1.0;
  const ConstrainedLdl r = constrained_ldl(SymmetricPsd(h), 1e6);
  EXPECT_TRUE(r.is_true_ldl);
  const LdlFactors f = ldl_upper(SymmetricPsd(h));
  EXPECT_EQ(r.l, f.l());
  EXPECT_NEAR(r.objective, 2.0, 1e-12);
}

TEST(ConstrainedLdl, TwoByTwoClosedForm) {
  // For n = 2 the only free entry is x = L(0,1) and the objective is
  // H00 + 2 x H01 + H11 (1 + x^2); its minimizer -H01/H11 clipped to
  // |x| <= sqrt(c) gives x = -0.5 and objective 2.25 at c = 0.25.
  Matrix h(2, 2);
  h << 2.0, 1.0, 1.0, 1.0;
  const ConstrainedLdl r = constrained_ldl(SymmetricPsd(h), 0.25);
  EXPECT_FALSE(r.is_true_ldl);
  EXPECT_NEAR(r.l(0, 1), -0.5, 1e-12);
  EXPECT_NEAR(r.objective, 2.25, 1e-12);

  // Both triangular orientations of the bound's candidate are oracle floors.
  const double alpha = 0.5;
  Matrix lower_part = Matrix::Zero(2, 2);
  lower_part(1, 0) = 1.0;
  Matrix upper_part = lower_part.transpose();
  const Matrix cand_lower = Matrix::Identity(2, 2) - (alpha / 3.0) * lower_part;
  const Matrix cand_upper = Matrix::Identity(2, 2) - (alpha / 3.0) * upper_part;
  EXPECT_NEAR(ldl_objective(h, cand_lower), 98.0 / 36.0, 1e-12);
  EXPECT_NEAR(ldl_objective(h, cand_upper), 97.0 / 36.0, 1e-12);
  EXPECT_LE(r.objective, ldl_objective(h, cand_lower));
  EXPECT_LE(r.objective, ldl_objective(h, cand_upper));
}

TEST(ConstrainedLdl, FeasibleAndBelowBoundChain) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t n = 2 + seed % 24;
    const SymmetricPsd h = random_psd(n, 1000 + seed, seed % 2 ? n / 2 + 1 : 0);
    const double c = seed % 3 == 0 ? 0.05 : (seed % 3 == 1 ? 0.3 : 2.0);
    const ConstrainedLdl r = constrained_ldl(h, c);
    const Matrix& l = r.l;
    EXPECT_LE(l.colwise().squaredNorm().maxCoeff(), 1.0 + c + 1e-10);
    EXPECT_EQ(l.diagonal(), Vector::Ones(n));
    const Matrix strict_lower = l.triangularView<Eigen::StrictlyLower>();
    EXPECT_EQ(strict_lower.norm(), 0.0);
    const double tr = h.trace();
    const double alpha = std::min(1.0, std::sqrt(c));
    const double delta = off_diagonal_sq(h.matrix()) / (2.0 * tr);
    EXPECT_LE(r.objective, tr * (1 + 1e-12));
    EXPECT_LE(r.objective, ldl_objective(h.matrix(), constrained_ldl_candidate(h, c)) + 1e-12);
    EXPECT_LE(r.objective, tr - (2 * alpha - alpha * alpha) * delta + 1e-9 * tr);
    EXPECT_LE((r.l * r.l_inv - Matrix::Identity(n, n)).norm(), 1e-8);
  }
}

TEST(ConstrainedLdl, NoFeasiblePerturbationImproves) {
  const SymmetricPsd h = random_psd(6, 77, 4);
  const double c = 0.1;
  const ConstrainedLdl r = constrained_ldl(h, c);
  Rng rng = make_rng(1);
  std::normal_distribution<double> dist(0.0, 1e-3);
  for (int trial = 0; trial < 500; ++trial) {
    Matrix l = r.l;
    for (Eigen::Index j = 1; j < l.cols(); ++j) {
      for (Eigen::Index i = 0; i < j; ++i) l(i, j) += dist(rng);
      const double free_sq = l.col(j).head(j).squaredNorm();
      if (free_sq > c) l.col(j).head(j) *= std::sqrt(c / free_sq);
    }
    EXPECT_GE(ldl_objective(h.matrix(), l), r.objective - 1e-9 * r.objective);
  }
}

TEST(ConstrainedLdl, RejectsBadInputs) {
  const SymmetricPsd h = random_psd(3, 1);
  EXPECT_THROW(constrained_ldl(h, 0.0), InvalidArgument);
  EXPECT_THROW(constrained_ldl(SymmetricPsd(Matrix::Zero(3, 3)), 1.0), InvalidArgument);
}

TEST(Jacobi, DiagonalInput) {
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 2.0;
  h(1, 1) = 5.0;
  const EigenDecomposition e = jacobi_eigh(h);
  EXPECT_DOUBLE_EQ(e.lambdas(0), 5.0);
  EXPECT_DOUBLE_EQ(e.lambdas(1), 2.0);
  EXPECT_DOUBLE_EQ(std::abs(e.q(1, 0)), 1.0);
  EXPECT_DOUBLE_EQ(std::abs(e.q(0, 1)), 1.0);
}

TEST(Jacobi, RecoversConstructedSpectrum) {
  const Matrix q0 = hadamard_orthonormal(2);
  Vector lam(2);
  lam << 4.0, 1.0;
  const Matrix h = q0 * lam.asDiagonal() * q0.transpose();
  const EigenDecomposition e = jacobi_eigh(h);
  EXPECT_NEAR(e.lambdas(0), 4.0, 1e-12);
  EXPECT_NEAR(e.lambdas(1), 1.0, 1e-12);
  EXPECT_LE((e.q.cwiseAbs() - q0.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Jacobi, ReconstructionAndOrthogonality) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SymmetricPsd h = random_psd(32, seed, seed % 2 ? 20 : 0);
    const EigenDecomposition e = jacobi_eigh(h);
    EXPECT_LE((e.reconstruct() - h.matrix()).norm(), 1e-9 * h.matrix().norm());
    EXPECT_LE(orthogonality_defect(e.q), 1e-9);
    EXPECT_GE(e.lambdas.minCoeff(), -1e-8 * h.trace());
    for (Eigen::Index i = 1; i < e.lambdas.size(); ++i) {
      EXPECT_GE(e.lambdas(i - 1), e.lambdas(i));
    }
    // Independent oracle: Eigen's self-adjoint solver (ascending order).
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(h.matrix());
    EXPECT_LE((e.lambdas.reverse() - ref.eigenvalues()).norm(), 1e-10 * h.matrix().norm());
  }
}

TEST(Archive, RoundTripsBothPrecisions) {
  const auto dir = std::filesystem::temp_directory_path() / "optrot_archive_test";
  std::filesystem::remove_all(dir);
  Rng rng = make_rng(11);
  const Matrix a = gaussian_matrix(3, 5, rng);
  const Matrix b = gaussian_matrix(7, 2, rng);
  TensorArchive out;
  out.add("a", a);
  out.add("b", b, Dtype::kF32);
  out.write(dir);

  const TensorArchive in = TensorArchive::read(dir);
  EXPECT_EQ(in.get("a"), a);
  EXPECT_EQ(in.get("b"), b.cast<float>().cast<double>());
  EXPECT_EQ(in.dtype("b"), Dtype::kF32);
  EXPECT_THROW(in.get("missing"), IoError);
  EXPECT_EQ(std::filesystem::file_size(dir / "tensors.bin"), 128u + 7 * 2 * 4);
  std::filesystem::remove_all(dir);
}

TEST(Archive, MissingDirectoryIsIoError) {
  EXPECT_THROW(TensorArchive::read("/nonexistent/optrot/archive"), IoError);
}

}  // namespace
}  // namespace optrot
