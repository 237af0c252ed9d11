#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "agpforge/spectral.hpp"
#include "oracles.hpp"

using namespace agpforge;
using oracles::Complex;
using oracles::Matrix;

namespace {

PauliOperator from_text_terms(int n, std::initializer_list<std::pair<const char*, double>> terms) {
  PauliOperator op(n);
  for (const auto& [t, c] : terms) op.add_term(PauliString::from_text(t), c);
  op.prune();
  return op;
}

}  // namespace

TEST_CASE("to_dense: hand-checked matrices") {
  const Matrix x = to_dense(from_text_terms(1, {{"X", 1.0}}));
  Matrix x_ref(2, 2);
  x_ref << 0, 1, 1, 0;
  CHECK((x - x_ref).cwiseAbs().maxCoeff() == 0.0);

  const Matrix zz = to_dense(from_text_terms(2, {{"ZZ", 1.0}}));
  Matrix zz_ref = Matrix::Zero(4, 4);
  zz_ref(0, 0) = 1;
  zz_ref(1, 1) = -1;
  zz_ref(2, 2) = -1;
  zz_ref(3, 3) = 1;
  CHECK((zz - zz_ref).cwiseAbs().maxCoeff() == 0.0);

  // two-spin Hamiltonian at delta = 0 against the Kronecker oracle
  const auto h = from_text_terms(2, {{"ZZ", -1.0}, {"XI", -1.0}, {"IX", -1.0}});
  CHECK((to_dense(h) - oracles::dense_from_operator(h)).cwiseAbs().maxCoeff() <= 1e-14);

  CHECK_THROWS(to_dense(from_text_terms(1, {{"X", 1.0}}), 0));
}

TEST_CASE("to_dense and apply_operator agree with the oracle on random operators") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 4);
    const auto op = oracles::random_operator(rng, n, 6);
    const Matrix dense = to_dense(op);
    CHECK((dense - oracles::dense_from_operator(op)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((dense - dense.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);  // Hermitian

    Eigen::VectorXcd psi = Eigen::VectorXcd::Random(dense.rows());
    CHECK((apply_operator(op, psi) - dense * psi).norm() <= 1e-12 * psi.norm() * 10);
  }
}

TEST_CASE("diagonalize: ordering, orthonormality, eigen-residual") {
  const auto spec = diagonalize(to_dense(from_text_terms(1, {{"Z", 1.0}})));
  CHECK(spec.energies(0) == doctest::Approx(-1.0));
  CHECK(spec.energies(1) == doctest::Approx(1.0));
  // ground state is |1>, excited is |0>
  CHECK(std::abs(spec.states(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(spec.states(0, 1)) == doctest::Approx(1.0));

  // rotated field: energies -+h, ground state (-sin(theta/2), cos(theta/2)) up to phase
  const double theta = 0.77, h = 1.3;
  const auto hs = from_text_terms(1, {{"X", h * std::sin(theta)}, {"Z", h * std::cos(theta)}});
  const auto spec2 = diagonalize(to_dense(hs));
  CHECK(spec2.energies(0) == doctest::Approx(-h).epsilon(1e-12));
  CHECK(spec2.energies(1) == doctest::Approx(h).epsilon(1e-12));
  Eigen::Vector2cd gs;
  gs << -std::sin(theta / 2), std::cos(theta / 2);
  CHECK(std::abs(gs.dot(spec2.states.col(0))) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 3);
    const Matrix m = to_dense(oracles::random_operator(rng, n, 6));
    const auto s = diagonalize(m);
    CHECK((s.states.adjoint() * s.states - Matrix::Identity(m.rows(), m.rows()))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
    CHECK((m * s.states - s.states * s.energies.asDiagonal().toDenseMatrix().cast<Complex>())
              .cwiseAbs()
              .maxCoeff() <= 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff()));
    for (int i = 0; i + 1 < s.dimension(); ++i) CHECK(s.energies(i) <= s.energies(i + 1));
  }

  CHECK_THROWS(diagonalize(Matrix::Random(3, 3)));  // not Hermitian
}

TEST_CASE("diagonalize: Ising L=3 spectrum solves the characteristic problem") {
  PauliOperator op(3);
  for (int i = 0; i < 3; ++i) {
    PauliString zz(3);
    zz.set_pauli(i, 'Z');
    zz.set_pauli((i + 1) % 3, 'Z');
    op.add_term(zz, -0.5);
    op.add_term(PauliString::single(3, i, 'X'), -0.5);
  }
  const Matrix m = to_dense(op);
  const auto spec = diagonalize(m);
  for (int n = 0; n < 8; ++n) {
    const Matrix shifted = m - spec.energies(n) * Matrix::Identity(8, 8);
    CHECK(std::abs(shifted.determinant()) <= 1e-8);
    CHECK((m * spec.states.col(n) - spec.energies(n) * spec.states.col(n)).norm() <= 1e-10);
  }
}

TEST_CASE("diagonalize: gauge matching keeps phases continuous along a path") {
  auto ham = [](double l) {
    return from_text_terms(1, {{"X", std::sin(l)}, {"Z", std::cos(l)}});
  };
  Spectrum prev = diagonalize(to_dense(ham(0.0)));
  for (int k = 1; k <= 40; ++k) {
    const double l = 0.05 * k;
    const Spectrum s = diagonalize(to_dense(ham(l)), &prev);
    for (int n = 0; n < 2; ++n) {
      const Complex ov = prev.states.col(n).dot(s.states.col(n));
      CHECK(ov.real() > 0.9);              // matched and phase-aligned
      CHECK(std::abs(ov.imag()) < 1e-10);  // overlap made real positive
    }
    prev = s;
  }
}

TEST_CASE("degenerate spectra are flagged and rejected by the oracle") {
  const auto spec = diagonalize(to_dense(from_text_terms(2, {{"ZZ", 1.0}})));
  CHECK(spec.degenerate);
  CHECK_THROWS(exact_agp(spec, spec, 1e-5));
}

TEST_CASE("exact_agp: lambda-independent Hamiltonian gives the zero operator") {
  const auto h = from_text_terms(2, {{"ZZ", -1.0}, {"XI", 0.4}, {"IX", 0.4}, {"ZI", 0.2}, {"IZ", 0.2}});
  const auto below = diagonalize(to_dense(h));
  const auto above = diagonalize(to_dense(h));
  const Matrix a = exact_agp(below, above, 1e-5);
  CHECK(a.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("exact_agp: rotating field gives A = +Y/2") {
  // h = (sin l, 0, cos l): the closed-form coefficient is
  // (h^z dh^x - h^x dh^z) / (2 (h^x^2 + h^z^2)) = 1/2 on the Y string.
  auto ham = [](double l) {
    return from_text_terms(1, {{"X", std::sin(l)}, {"Z", std::cos(l)}});
  };
  const double l0 = 0.6, dl = 1e-5;
  const auto below = diagonalize(to_dense(ham(l0 - dl)));
  const auto above = diagonalize(to_dense(ham(l0 + dl)));
  const Matrix a = exact_agp(below, above, dl);
  const Matrix y_half = 0.5 * oracles::pauli_matrix('Y');
  CHECK((a - y_half).cwiseAbs().maxCoeff() <= 1e-8);

  // perturbative route agrees
  const auto center = diagonalize(to_dense(ham(l0)));
  const auto dh = to_dense(from_text_terms(1, {{"X", std::cos(l0)}, {"Z", -std::sin(l0)}}));
  const Matrix ap = exact_agp_perturbative(center, dh);
  CHECK((ap - y_half).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("exact_agp: zero diagonal, Hermitian, Richardson convergence, Eq.-3 residual") {
  std::mt19937_64 rng(13);
  int accepted = 0;
  while (accepted < 25) {
    const int n = 1 + static_cast<int>(rng() % 3);
    const auto h0 = oracles::random_operator(rng, n, 2 * n + 1);
    const auto h1 = oracles::random_operator(rng, n, 2 * n + 1);
    auto op_at = [&](double l) {
      PauliOperator op = h0;
      op += l * h1;
      return op;
    };
    const double l0 = 0.3;
    const auto center = diagonalize(to_dense(op_at(l0)));
    if (center.min_gap < 5e-2) continue;  // keep the finite difference honest
    ++accepted;

    const double dl = 1e-5;
    const auto below = diagonalize(to_dense(op_at(l0 - dl)));
    const auto above = diagonalize(to_dense(op_at(l0 + dl)));
    const Matrix a = exact_agp(below, above, dl);

    CHECK((a - a.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
    const Matrix a_eig = center.states.adjoint() * a * center.states;
    for (int k = 0; k < a_eig.rows(); ++k) CHECK(std::abs(a_eig(k, k)) <= 1e-8);

    // condition (3): [H, dH - i[H, A]] = 0
    const Matrix hm = to_dense(op_at(l0));
    const Matrix dh = to_dense(h1);
    const Matrix g = dh - Complex(0, 1) * (hm * a - a * hm);
    const Matrix cond = hm * g - g * hm;
    CHECK(cond.cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, dh.cwiseAbs().maxCoeff()));

    // the perturbative route pins the same operator tighter
    const Matrix ap = exact_agp_perturbative(center, dh);
    CHECK((a - ap).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, ap.cwiseAbs().maxCoeff()));

    // O(dl^2): halving the step shrinks the distance to the exact answer ~4x
    const auto below2 = diagonalize(to_dense(op_at(l0 - dl / 2)));
    const auto above2 = diagonalize(to_dense(op_at(l0 + dl / 2)));
    const Matrix a2 = exact_agp(below2, above2, dl / 2);
    const double err1 = (a - ap).cwiseAbs().maxCoeff();
    const double err2 = (a2 - ap).cwiseAbs().maxCoeff();
    // ratio is ~4 where the finite-difference error dominates solver noise
    if (err1 > 1e-8) CHECK(err2 <= 0.6 * err1);
  }
}

TEST_CASE("geometric_tensor_sum equals the squared HS norm of the gauge potential") {
  auto ham = [](double l) {
    return from_text_terms(1, {{"X", std::sin(l)}, {"Z", std::cos(l)}});
  };
  const double l0 = 1.1, dl = 1e-5;
  const auto below = diagonalize(to_dense(ham(l0 - dl)));
  const auto above = diagonalize(to_dense(ham(l0 + dl)));
  const double gts = geometric_tensor_sum(below, above, dl);
  CHECK(gts == doctest::Approx(0.5).epsilon(1e-7));  // Tr((Y/2)^2) = 1/2

  const Matrix a = exact_agp(below, above, dl);
  CHECK(gts == doctest::Approx((a * a).trace().real()).epsilon(1e-8));

  // lambda-independent Hamiltonian: zero
  const auto fixed = diagonalize(to_dense(from_text_terms(2, {{"ZZ", -1.0}, {"XI", 0.7}, {"IX", 0.3}})));
  CHECK(geometric_tensor_sum(fixed, fixed, 1e-5) <= 1e-10);
}

TEST_CASE("oracle_agp: route selection and Richardson check") {
  auto h = single_spin_system(CoeffSchedule{[](double l) { return std::sin(l); },
                                            [](double l) { return std::cos(l); }},
                              CoeffSchedule::constant(0.0),
                              CoeffSchedule{[](double l) { return std::cos(l); },
                                            [](double l) { return -std::sin(l); }});
  const Matrix a = oracle_agp(h, 0.9);
  CHECK((a - 0.5 * oracles::pauli_matrix('Y')).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("spectrum_csv emits one row per lambda") {
  const auto spec = diagonalize(to_dense(from_text_terms(1, {{"Z", 1.0}})));
  const std::string csv = spectrum_csv({{0.0, spec}, {1.0, spec}});
  CHECK(csv.find("lambda,E_0,E_1\n") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
