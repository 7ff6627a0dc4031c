#pragma once

#include "doco/plant_network.hpp"

namespace fixture {

using namespace doco;

// Two single integrators on one edge, f_i = (y_i - c_i)^2, g_i = y_i - d_i,
// y_i in [lo, hi].
inline Network pair_network(double c1 = 2, double c2 = 2, double d1 = 1, double d2 = 1, double lo = 0,
                            double hi = 5) {
  Network net;
  Eigen::MatrixXi a(2, 2);
  a << 0, 1, 1, 0;
  net.graph = Graph(a);
  const double c[2] = {c1, c2}, d[2] = {d1, d2};
  for (int i = 0; i < 2; ++i) {
    Model m{Matrix::Zero(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
    Gains g = synthesize_gains(m, 0.5);
    g.K = Matrix::Identity(1, 1);
    net.models.push_back(m);
    net.gains.push_back(g);
    net.problems.emplace_back(
        std::make_shared<SinusoidalQuadraticCost>(std::vector<SinusoidalQuadraticCost::Term>{{1, 0, 0, c[i]}}),
        std::make_shared<SinusoidalAffineConstraint>(
            std::vector<SinusoidalAffineConstraint::Row>{{{{1, 0, 0}}, -d[i], 0, 0}}, 1),
        Box::uniform(1, lo, hi));
    net.initial_state.push_back(Vector::Constant(1, 1.0 + i));
  }
  return net;
}

}  // namespace fixture
