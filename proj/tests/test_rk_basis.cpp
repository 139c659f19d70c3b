#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "oracles.hpp"
#include "pgs/grid.hpp"
#include "pgs/rk_basis.hpp"

using namespace pgs;

namespace {

NodeGrid paper_grid() { return make_node_grid(21, 21, 0.05, 10, 10); }

rk::Params params_for(const NodeGrid& grid, double support_mult, int order = 1) {
  rk::Params p;
  p.order = order;
  p.support = support_mult * grid.kernel_spacing();
  return p;
}

}  // namespace

TEST(Window, CompactSupportBoundary) {
  EXPECT_EQ(rk::window_eval(1.0, 1.0), 0.0);
  EXPECT_EQ(rk::window_eval(2.7, 2.7), 0.0);
  EXPECT_EQ(rk::window_eval(5.0, 2.7), 0.0);
}

TEST(Window, CenterValue) {
  EXPECT_DOUBLE_EQ(rk::window_eval(0.0, 1.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(rk::window_eval(0.0, 0.37), 2.0 / 3.0);
}

TEST(Window, HalfSupportValueBothBranchesAgree) {
  // Inner piece at s = 0.5: 2/3 - 4/4 + 4/8 = 1/6; outer piece: (4/3)(1/2)^3.
  const double inner = 2.0 / 3.0 - 4.0 * 0.25 + 4.0 * 0.125;
  const double outer = 4.0 / 3.0 * 0.125;
  ASSERT_DOUBLE_EQ(inner, outer);
  EXPECT_DOUBLE_EQ(rk::window_eval(0.5, 1.0), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(rk::window_eval(1.3, 2.6), 1.0 / 6.0);
}

TEST(Window, InvalidSupport) {
  EXPECT_THROW(rk::window_eval(0.1, 0.0), InvalidParameterError);
  EXPECT_THROW(rk::window_eval(0.1, -2.0), InvalidParameterError);
  EXPECT_THROW(rk::window_deriv(0.1, 0.0), InvalidParameterError);
}

TEST(Window, DerivativeMatchesFiniteDifference) {
  const double a = 1.7;
  const double h = 1e-7;
  for (double r : {0.05, 0.3, 0.49, 0.51, 0.7, 0.84, 0.99}) {
    const double fd = (rk::window_eval(r * a + h, a) - rk::window_eval(r * a - h, a)) / (2 * h);
    EXPECT_NEAR(rk::window_deriv(r * a, a), fd, 1e-6) << "r/a = " << r;
  }
  EXPECT_DOUBLE_EQ(rk::window_deriv(0.0, a), 0.0);
}

TEST(Monomials, OrderOne) {
  const Eigen::VectorXd at_zero = rk::monomial_basis({0.0, 0.0}, 1);
  ASSERT_EQ(at_zero.size(), 3);
  EXPECT_EQ(at_zero(0), 1.0);
  EXPECT_EQ(at_zero(1), 0.0);
  EXPECT_EQ(at_zero(2), 0.0);

  const Eigen::VectorXd h = rk::monomial_basis({2.0, -3.0}, 1);
  EXPECT_EQ(h(0), 1.0);
  EXPECT_EQ(h(1), 2.0);
  EXPECT_EQ(h(2), -3.0);
}

TEST(Monomials, OrderTwoGradedLex) {
  const Eigen::VectorXd h = rk::monomial_basis({2.0, -3.0}, 2);
  ASSERT_EQ(h.size(), 6);
  const double expected[] = {1.0, 2.0, -3.0, 4.0, -6.0, 9.0};
  for (int i = 0; i < 6; ++i) EXPECT_EQ(h(i), expected[i]) << "monomial " << i;
}

TEST(Monomials, UnsupportedOrder) {
  EXPECT_THROW(rk::monomial_basis({0.0, 0.0}, 3), InvalidParameterError);
  EXPECT_THROW(rk::monomial_basis({0.0, 0.0}, -1), InvalidParameterError);
}

TEST(MomentMatrix, EmptySupportIsSingular) {
  const NodeGrid grid = paper_grid();
  // A point far outside the domain has no center in support.
  EXPECT_THROW(rk::moment_matrix({50.0, 50.0}, grid, 0.1, 1), SingularMomentError);
}

TEST(MomentMatrix, SingleCenterOrderZero) {
  NodeGrid grid;
  grid.dx = 1.0;
  grid.measurement_points = {{0.0, 0.0}, {1.0, 0.0}};
  grid.kernel_centers = {{0.0, 0.0}, {10.0, 10.0}};
  const auto mom = rk::moment_matrix({0.0, 0.0}, grid, 1.0, 0);
  ASSERT_EQ(mom.entries.rows(), 1);
  EXPECT_DOUBLE_EQ(mom.entries(0, 0), 2.0 / 3.0);
}

TEST(MomentMatrix, MatchesBruteForceSum) {
  const NodeGrid grid = paper_grid();
  const auto p = params_for(grid, 3.1);
  const Eigen::Vector2d center{0.5, 0.5};
  const auto mom = rk::moment_matrix(center, grid, p.support, 1);
  const Eigen::MatrixXd ref = oracle::brute_moment(center, grid, p.support, 1);
  EXPECT_LT((mom.entries - ref).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(mom.entries.isApprox(mom.entries.transpose(), 1e-15));
}

TEST(ShapeFunction, ZeroOutsideSupport) {
  const NodeGrid grid = paper_grid();
  const auto p = params_for(grid, 3.1);
  const Eigen::Vector2d x{0.2, 0.3};
  for (int i = 0; i < grid.num_centers(); ++i) {
    if ((x - grid.kernel_centers[i]).norm() >= p.support) {
      EXPECT_EQ(rk::shape_function(x, i, grid, p), 0.0) << "center " << i;
    }
  }
}

TEST(ShapeFunction, PartitionOfUnity) {
  const NodeGrid grid = paper_grid();
  const auto p = params_for(grid, 3.1);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> coord(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector2d x{coord(rng), coord(rng)};
    double sum = 0.0;
    for (int i = 0; i < grid.num_centers(); ++i) sum += rk::shape_function(x, i, grid, p);
    EXPECT_NEAR(sum, 1.0, 1e-10) << x.transpose();
  }
}

TEST(ShapeFunction, LinearReproduction) {
  const NodeGrid grid = paper_grid();
  const auto p = params_for(grid, 3.1);
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> coord(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector2d x{coord(rng), coord(rng)};
    Eigen::Vector2d rec = Eigen::Vector2d::Zero();
    for (int i = 0; i < grid.num_centers(); ++i) {
      rec += rk::shape_function(x, i, grid, p) * grid.kernel_centers[i];
    }
    EXPECT_LT((rec - x).norm(), 1e-10) << x.transpose();
  }
}

TEST(ShapeGradient, SumsVanishAndReproduceIdentity) {
  const NodeGrid grid = paper_grid();
  const auto p = params_for(grid, 3.1);
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> coord(0.05, 0.95);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Vector2d x{coord(rng), coord(rng)};
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    Eigen::Matrix2d moment_sum = Eigen::Matrix2d::Zero();
    for (int i = 0; i < grid.num_centers(); ++i) {
      const Eigen::Vector2d g = rk::shape_gradient(x, i, grid, p);
      sum += g;
      moment_sum += g * grid.kernel_centers[i].transpose();
    }
    EXPECT_LT(sum.norm(), 1e-8);
    // Σ ∇Φ_I ⊗ x̄_I = ∇(x) = I for first-order reproduction.
    EXPECT_LT((moment_sum - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(ShapeGradient, MatchesCentralFiniteDifference) {
  const NodeGrid grid = paper_grid();
  const auto p = params_for(grid, 3.1);
  const double h = 1e-5 * grid.dx;
  std::mt19937 rng(14);
  std::uniform_real_distribution<double> coord(0.02, 0.98);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const Eigen::Vector2d x{coord(rng), coord(rng)};
    // Pick a center well inside the support so the value is non-trivial.
    int center = -1;
    for (int i = 0; i < grid.num_centers(); ++i) {
      if ((x - grid.kernel_centers[i]).norm() < 0.8 * p.support) {
        center = i;
        break;
      }
    }
    ASSERT_GE(center, 0);
    const Eigen::Vector2d g = rk::shape_gradient(x, center, grid, p);
    Eigen::Vector2d fd;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      fd(k) = (rk::shape_function(xp, center, grid, p) -
               rk::shape_function(xm, center, grid, p)) /
              (2 * h);
    }
    const double rel = (g - fd).norm() / std::max(fd.norm(), 1e-12);
    EXPECT_LT(rel, 1e-5) << "x = " << x.transpose() << ", center " << center;
    ++checked;
  }
  EXPECT_GE(checked, 100);
}

TEST(AssembleBasis, PaperConfiguration) {
  const NodeGrid grid = paper_grid();
  const auto p = params_for(grid, 3.1);
  const rk::RKBasis basis = rk::assemble_basis(grid, p.support, p.order);
  ASSERT_EQ(basis.shape.rows(), 441);
  ASSERT_EQ(basis.shape.cols(), 100);
  for (int j = 0; j < basis.num_points(); ++j) {
    EXPECT_NEAR(basis.shape.row(j).sum(), 1.0, 1e-10) << "row " << j;
    EXPECT_NEAR(basis.grad_x.row(j).sum(), 0.0, 1e-8) << "row " << j;
    EXPECT_NEAR(basis.grad_y.row(j).sum(), 0.0, 1e-8) << "row " << j;
  }
}

TEST(AssembleBasis, TinySupportFails) {
  const NodeGrid grid = paper_grid();
  EXPECT_THROW(rk::assemble_basis(grid, 0.1 * grid.dx, 1), SingularMomentError);
}

TEST(AssembleBasis, RowSparsityMatchesGeometricSupports) {
  const NodeGrid grid = paper_grid();
  for (double mult : {2.1, 3.1, 4.1}) {
    const auto p = params_for(grid, mult);
    const rk::RKBasis basis = rk::assemble_basis(grid, p.support, p.order);
    int max_nonzeros = 0;
    for (int j = 0; j < basis.num_points(); ++j) {
      const int count =
          oracle::support_count(grid.measurement_points[j], grid, p.support);
      int nonzeros = 0;
      for (int i = 0; i < basis.num_centers(); ++i) {
        if (basis.shape(j, i) != 0.0) ++nonzeros;
      }
      // The moment solve never zeroes a windowed term on these grids, so
      // the structural and numerical sparsity coincide.
      EXPECT_EQ(nonzeros, count) << "row " << j << " mult " << mult;
      max_nonzeros = std::max(max_nonzeros, nonzeros);
    }
    // Area heuristic π·mult² understates lattice boundary effects; the
    // geometric count is the contract. Frozen maxima for this layout:
    const int frozen_max = mult == 2.1 ? 16 : (mult == 3.1 ? 32 : 56);
    EXPECT_LE(max_nonzeros, frozen_max) << "mult " << mult;
  }
}

TEST(AssembleBasis, PolynomialReproductionFamily) {
  const NodeGrid grid = paper_grid();
  for (double mult : {2.1, 3.1, 4.1}) {
    const auto p = params_for(grid, mult);
    const rk::RKBasis basis = rk::assemble_basis(grid, p.support, p.order);
    // p(x) = c0 + c1 x1 + c2 x2 over a few random coefficient draws.
    std::mt19937 rng(15);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
      const double c0 = coef(rng), c1 = coef(rng), c2 = coef(rng);
      Eigen::VectorXd at_centers(grid.num_centers());
      for (int i = 0; i < grid.num_centers(); ++i) {
        at_centers(i) = c0 + c1 * grid.kernel_centers[i].x() +
                        c2 * grid.kernel_centers[i].y();
      }
      const Eigen::VectorXd rec = basis.shape * at_centers;
      const Eigen::VectorXd dx = basis.grad_x * at_centers;
      const Eigen::VectorXd dy = basis.grad_y * at_centers;
      for (int j = 0; j < grid.num_points(); ++j) {
        const double exact = c0 + c1 * grid.measurement_points[j].x() +
                             c2 * grid.measurement_points[j].y();
        EXPECT_LT(std::abs(rec(j) - exact), 1e-9 * (1.0 + std::abs(exact)));
        EXPECT_NEAR(dx(j), c1, 1e-7);
        EXPECT_NEAR(dy(j), c2, 1e-7);
      }
    }
  }
}

TEST(AssembleBasis, QuadraticOrderReproducesQuadratics) {
  const NodeGrid grid = make_node_grid(13, 13, 0.1, 8, 8);
  const auto p = params_for(grid, 3.1, 2);
  const rk::RKBasis basis = rk::assemble_basis(grid, p.support, p.order);
  Eigen::VectorXd at_centers(grid.num_centers());
  for (int i = 0; i < grid.num_centers(); ++i) {
    const auto& c = grid.kernel_centers[i];
    at_centers(i) = 0.3 + c.x() - 2.0 * c.y() + c.x() * c.x() + 0.5 * c.x() * c.y();
  }
  const Eigen::VectorXd rec = basis.shape * at_centers;
  for (int j = 0; j < grid.num_points(); ++j) {
    const auto& x = grid.measurement_points[j];
    const double exact = 0.3 + x.x() - 2.0 * x.y() + x.x() * x.x() + 0.5 * x.x() * x.y();
    EXPECT_LT(std::abs(rec(j) - exact), 1e-9 * (1.0 + std::abs(exact))) << j;
  }
}

TEST(AssembleBasis, CompactSupportExact) {
  const NodeGrid grid = paper_grid();
  const auto p = params_for(grid, 2.1);
  const rk::RKBasis basis = rk::assemble_basis(grid, p.support, p.order);
  for (int j = 0; j < basis.num_points(); ++j) {
    for (int i = 0; i < basis.num_centers(); ++i) {
      const double dist = (grid.measurement_points[j] - grid.kernel_centers[i]).norm();
      if (dist >= p.support) {
        EXPECT_EQ(basis.shape(j, i), 0.0);
        EXPECT_EQ(basis.grad_x(j, i), 0.0);
      }
    }
  }
}

TEST(AssembleBasis, Deterministic) {
  const NodeGrid grid = paper_grid();
  const auto p = params_for(grid, 3.1);
  const rk::RKBasis one = rk::assemble_basis(grid, p.support, p.order);
  const rk::RKBasis two = rk::assemble_basis(grid, p.support, p.order);
  EXPECT_TRUE((one.shape.array() == two.shape.array()).all());
  EXPECT_TRUE((one.grad_x.array() == two.grad_x.array()).all());
  EXPECT_TRUE((one.grad_y.array() == two.grad_y.array()).all());
}

TEST(GridValidation, RejectsDegenerateInputs) {
  NodeGrid grid = paper_grid();
  grid.measurement_points[5] = grid.measurement_points[4];
  EXPECT_THROW(validate_grid(grid, 3), InvalidParameterError);

  NodeGrid nan_grid = paper_grid();
  nan_grid.kernel_centers[0](0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(validate_grid(nan_grid, 3), InvalidParameterError);
}
