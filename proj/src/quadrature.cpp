#include "minee/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace minee::quadrature {
namespace {

double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

}  // namespace

std::vector<double> simpson_weights(double a, double b, int intervals) {
  if (intervals < 2 || intervals % 2 != 0) {
    throw std::invalid_argument("Simpson rule needs an even number of intervals");
  }
  const double h = (b - a) / intervals;
  std::vector<double> w(static_cast<std::size_t>(intervals) + 1);
  for (int i = 0; i <= intervals; ++i) {
    const double c = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    w[static_cast<std::size_t>(i)] = c * h / 3.0;
  }
  return w;
}

double entropy_1d(const std::function<double(double)>& density, double a, double b,
                  int intervals) {
  const auto w = simpson_weights(a, b, intervals);
  const double h = (b - a) / intervals;
  double acc = 0.0;
  for (int i = 0; i <= intervals; ++i) acc -= w[static_cast<std::size_t>(i)] * plogp(density(a + i * h));
  return acc;
}

double entropy_2d(const std::function<double(double, double)>& density, double a, double b,
                  int intervals) {
  const auto w = simpson_weights(a, b, intervals);
  const double h = (b - a) / intervals;
  double acc = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    double row = 0.0;
    for (int j = 0; j <= intervals; ++j) {
      row += w[static_cast<std::size_t>(j)] * plogp(density(a + i * h, a + j * h));
    }
    acc -= w[static_cast<std::size_t>(i)] * row;
  }
  return acc;
}

MutualInformation2d mutual_information_2d(
    const std::function<double(double, double)>& joint, double a, double b, int intervals) {
  const auto w = simpson_weights(a, b, intervals);
  const double h = (b - a) / intervals;
  const std::size_t n = w.size();
  std::vector<double> px(n, 0.0);
  std::vector<double> py(n, 0.0);
  double h_xy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a + static_cast<double>(i) * h;
    for (std::size_t j = 0; j < n; ++j) {
      const double p = joint(x, a + static_cast<double>(j) * h);
      px[i] += w[j] * p;
      py[j] += w[i] * p;
      h_xy -= w[i] * w[j] * plogp(p);
    }
  }
  MutualInformation2d mi;
  mi.h_xy = h_xy;
  for (std::size_t i = 0; i < n; ++i) {
    mi.h_x -= w[i] * plogp(px[i]);
    mi.h_y -= w[i] * plogp(py[i]);
  }
  return mi;
}

}  // namespace minee::quadrature
