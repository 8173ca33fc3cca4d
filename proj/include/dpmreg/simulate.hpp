#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dpmreg/model.hpp"

namespace dpmreg {

struct ComponentSpec {
  double mu = 0.0;
  Eigen::VectorXd beta;
  Eigen::VectorXd m;
  Eigen::VectorXd tau;
};

struct SimTruth {
  std::vector<int> labels;  // 0-based component index per row
  std::vector<ComponentSpec> components;
  double sigma2 = 1.0;

  // Row i holds beta of component labels[i].
  Eigen::MatrixXd true_betas() const;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> true_nonzero() const;
};

struct SimulatedData {
  Dataset data;
  SimTruth truth;
};

// The benchmark recipe: component j (1-based) has m_j = 2j, tau_j = 1,
// mu_j = 10 - 2(j-1) for j <= 5 and 10 - 2j beyond, and beta_j holding 6-j
// leading 3's (j <= 5) or j-5 leading -3's (j > 5). Throws for p < 5 or J
// outside 1..10.
std::vector<ComponentSpec> paper_components(int p, int J);

SimulatedData generate_paper_dataset(int n, int p, int J, std::uint64_t seed);

struct TrainTest {
  SimulatedData train;
  SimulatedData test;
};
// Train and test come from independent substreams of `seed`.
TrainTest generate_paper_train_test(int n, int p, int J, std::uint64_t seed, int n_test = 100);

// Equal-weight mixture of the given components with noise variance sigma2.
SimulatedData generate_generic_mixture(const std::vector<ComponentSpec>& components, int n,
                                       double sigma2, std::uint64_t seed);

}  // namespace dpmreg
