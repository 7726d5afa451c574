#pragma once

#include <functional>
#include <vector>

namespace minee::quadrature {

/// Composite Simpson weights on [a, b] with `intervals` (even) subintervals;
/// returns intervals + 1 weights, abscissae a + i * h.
std::vector<double> simpson_weights(double a, double b, int intervals);

/// -integral of p ln p over [a, b].
double entropy_1d(const std::function<double(double)>& density, double a, double b,
                  int intervals);

/// -integral of p ln p over [a, b]^2 (tensor Simpson rule).
double entropy_2d(const std::function<double(double, double)>& density, double a, double b,
                  int intervals);

struct MutualInformation2d {
  double h_x = 0.0;
  double h_y = 0.0;
  double h_xy = 0.0;
  double value() const { return h_x + h_y - h_xy; }
};

/// H(X) + H(Y) - H(X,Y) for a bivariate density on [a, b]^2; the marginals
/// are obtained by integrating the joint on the same grid.
MutualInformation2d mutual_information_2d(
    const std::function<double(double, double)>& joint, double a, double b, int intervals);

}  // namespace minee::quadrature
