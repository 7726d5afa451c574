#include "minee/distributions.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "minee/csv.hpp"
#include "minee/errors.hpp"
#include "minee/quadrature.hpp"

namespace minee {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw ContractViolation("rho must lie in [0, 1), got " + csv::format_double(rho));
  }
}

void check_count(Index n) {
  if (n < 1) throw ContractViolation("sample count must be positive");
}

double bivariate_normal_density(double rho, double x, double y) {
  const double one_minus = 1.0 - rho * rho;
  const double q = (x * x - 2.0 * rho * x * y + y * y) / one_minus;
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(one_minus));
}

}  // namespace

void MixedGaussianModel::validate() const { check_rho(rho); }

void CorrelatedGaussianModel::validate() const {
  check_rho(rho);
  if (d < 1) throw ContractViolation("d must be >= 1");
}

ColumnSplit column_split(const Model& model) {
  return std::visit(overloaded{[](const MixedGaussianModel&) { return ColumnSplit{1, 1}; },
                               [](const CorrelatedGaussianModel& m) {
                                 return ColumnSplit{m.d, m.d};
                               }},
                    model);
}

std::string describe(const Model& model) {
  return std::visit(
      overloaded{[](const MixedGaussianModel& m) { return "MG(" + csv::format_double(m.rho) + ")"; },
                 [](const CorrelatedGaussianModel& m) {
                   return "HG(" + csv::format_double(m.rho) + "," + std::to_string(m.d) + ")";
                 }},
      model);
}

SampleBatch sample_mg(const MixedGaussianModel& model, Index n, std::uint64_t seed) {
  model.validate();
  check_count(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  const double s = std::sqrt(1.0 - model.rho * model.rho);
  SampleBatch out(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double sign = coin(rng) ? 1.0 : -1.0;
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    out(i, 0) = z1;
    out(i, 1) = sign * model.rho * z1 + s * z2;
  }
  return out;
}

SampleBatch sample_hg(const CorrelatedGaussianModel& model, Index n, std::uint64_t seed) {
  model.validate();
  check_count(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double s = std::sqrt(1.0 - model.rho * model.rho);
  const Index d = model.d;
  SampleBatch out(n, 2 * d);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) {
      const double z1 = normal(rng);
      const double z2 = normal(rng);
      out(i, k) = z1;
      out(i, d + k) = model.rho * z1 + s * z2;
    }
  }
  return out;
}

SampleBatch sample_model(const Model& model, Index n, std::uint64_t seed) {
  return std::visit(
      overloaded{[&](const MixedGaussianModel& m) { return sample_mg(m, n, seed); },
                 [&](const CorrelatedGaussianModel& m) { return sample_hg(m, n, seed); }},
      model);
}

UniformBoxReference::UniformBoxReference(Vector lower, Vector upper)
    : lower_(std::move(lower)), upper_(std::move(upper)), log_volume_(0.0) {
  if (lower_.size() != upper_.size() || lower_.size() == 0) {
    throw ContractViolation("box bounds must be non-empty and of equal length");
  }
  for (Index i = 0; i < lower_.size(); ++i) {
    const double width = upper_[i] - lower_[i];
    if (!(width > 0.0) || !std::isfinite(width)) {
      throw DegenerateBox("box side " + std::to_string(i) + " has non-positive width",
                          static_cast<std::size_t>(i));
    }
    log_volume_ += std::log(width);
  }
  if (!std::isfinite(log_volume_)) throw DegenerateBox("box volume is not finite", 0);
}

bool UniformBoxReference::contains(const Eigen::Ref<const Eigen::RowVectorXd>& point) const {
  if (point.size() != dim()) throw ContractViolation("point dimension does not match box");
  for (Index i = 0; i < dim(); ++i) {
    if (!(point[i] >= lower_[i] && point[i] <= upper_[i])) return false;
  }
  return true;
}

UniformBoxReference UniformBoxReference::sub_box(Index first, Index count) const {
  if (first < 0 || count < 1 || first + count > dim()) {
    throw ContractViolation("sub_box range out of bounds");
  }
  return UniformBoxReference(lower_.segment(first, count), upper_.segment(first, count));
}

ResampledMarginalReference ResampledMarginalReference::from_joint(const SampleBatch& joint,
                                                                  ColumnSplit split) {
  if (joint.cols() != split.total()) throw ContractViolation("column split does not match data");
  ResampledMarginalReference r{joint.leftCols(split.dx), joint.rightCols(split.dy)};
  r.validate();
  return r;
}

void ResampledMarginalReference::validate() const {
  if (x_pool.rows() == 0 || y_pool.rows() == 0) throw ContractViolation("empty marginal pool");
  if (x_pool.rows() != y_pool.rows()) {
    throw ContractViolation("marginal pools must have the same row count");
  }
}

UniformBoxReference box_from_samples(const SampleBatch& samples, double margin) {
  if (samples.rows() == 0 || samples.cols() == 0) throw ContractViolation("no samples for box");
  if (!(margin >= 0.0)) throw ContractViolation("margin must be non-negative");
  const Eigen::RowVectorXd lo = samples.colwise().minCoeff();
  const Eigen::RowVectorXd hi = samples.colwise().maxCoeff();
  const Eigen::RowVectorXd range = hi - lo;
  for (Index i = 0; i < samples.cols(); ++i) {
    if (!(range[i] > 0.0)) {
      throw DegenerateBox("column " + std::to_string(i) + " of the samples is constant",
                          static_cast<std::size_t>(i));
    }
  }
  return UniformBoxReference((lo - margin * range).transpose(), (hi + margin * range).transpose());
}

ReferenceLogDensity ref_log_density(const UniformBoxReference& ref, const SampleBatch& points) {
  if (points.cols() != ref.dim()) throw ContractViolation("points do not match box dimension");
  ReferenceLogDensity out;
  out.log_density.resize(points.rows());
  for (Index r = 0; r < points.rows(); ++r) {
    if (ref.contains(points.row(r))) {
      out.log_density[r] = -ref.log_volume();
    } else {
      out.log_density[r] = -std::numeric_limits<double>::infinity();
      out.out_of_support.push_back(r);
    }
  }
  return out;
}

SampleBatch ref_sample(const UniformBoxReference& ref, Index n, std::mt19937_64& rng) {
  check_count(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vector width = ref.upper() - ref.lower();
  SampleBatch out(n, ref.dim());
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < ref.dim(); ++c) out(r, c) = ref.lower()[c] + width[c] * u(rng);
  }
  return out;
}

SampleBatch ref_sample(const ResampledMarginalReference& ref, Index n, std::mt19937_64& rng) {
  check_count(n);
  ref.validate();
  const Index dx = ref.x_pool.cols();
  const Index dy = ref.y_pool.cols();
  std::uniform_int_distribution<Index> pick(0, ref.x_pool.rows() - 1);
  SampleBatch out(n, dx + dy);
  for (Index r = 0; r < n; ++r) {
    const Index i = pick(rng);
    const Index j = pick(rng);
    out.row(r).head(dx) = ref.x_pool.row(i);
    out.row(r).tail(dy) = ref.y_pool.row(j);
  }
  return out;
}

SampleBatch ref_sample(const UniformBoxReference& ref, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ref_sample(ref, n, rng);
}

SampleBatch ref_sample(const ResampledMarginalReference& ref, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ref_sample(ref, n, rng);
}

double ground_truth_mi_hg(const CorrelatedGaussianModel& model) {
  model.validate();
  return -0.5 * static_cast<double>(model.d) * std::log1p(-model.rho * model.rho);
}

double standard_normal_density(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double mg_joint_density(double rho, double x, double y) {
  return 0.5 * bivariate_normal_density(rho, x, y) + 0.5 * bivariate_normal_density(-rho, x, y);
}

QuadratureEstimate ground_truth_mi_mg(const MixedGaussianModel& model, int grid_resolution) {
  model.validate();
  if (grid_resolution < 2 || grid_resolution % 2 != 0) {
    throw ContractViolation("grid_resolution must be a positive even integer");
  }
  const double rho = model.rho;
  const auto density = [rho](double x, double y) { return mg_joint_density(rho, x, y); };
  const double a = -kQuadratureHalfWidth;
  const double b = kQuadratureHalfWidth;
  const auto coarse = quadrature::mutual_information_2d(density, a, b, grid_resolution);
  const auto fine = quadrature::mutual_information_2d(density, a, b, 2 * grid_resolution);

  QuadratureEstimate est;
  est.value = fine.value();
  est.coarse_value = coarse.value();
  est.coarse_resolution = grid_resolution;
  est.fine_resolution = 2 * grid_resolution;
  est.h_x = fine.h_x;
  est.h_y = fine.h_y;
  est.h_xy = fine.h_xy;
  if (!(std::abs(est.value - est.coarse_value) < kQuadratureTolerance)) {
    std::ostringstream msg;
    msg << "MG quadrature unconverged: " << csv::format_double(est.coarse_value) << " nats at "
        << grid_resolution << " intervals vs " << csv::format_double(est.value) << " at "
        << 2 * grid_resolution;
    throw UnconvergedQuadrature(msg.str(), est.coarse_value, est.value);
  }
  return est;
}

GroundTruth ground_truth(const Model& model, int grid_resolution) {
  return std::visit(
      overloaded{
          [&](const MixedGaussianModel& m) {
            const QuadratureEstimate q = ground_truth_mi_mg(m, grid_resolution);
            std::ostringstream details;
            details << "Simpson rule on [-" << kQuadratureHalfWidth << "," << kQuadratureHalfWidth
                    << "]^2, " << q.coarse_resolution << " and " << q.fine_resolution
                    << " intervals per axis: " << csv::format_double(q.coarse_value) << " -> "
                    << csv::format_double(q.value) << " (change "
                    << csv::format_double(std::abs(q.value - q.coarse_value)) << " nats)";
            return GroundTruth{q.value, "quadrature", details.str()};
          },
          [](const CorrelatedGaussianModel& m) {
            return GroundTruth{ground_truth_mi_hg(m), "closed_form",
                               "-(d/2) ln(1 - rho^2) with d=" + std::to_string(m.d) +
                                   ", rho=" + csv::format_double(m.rho)};
          }},
      model);
}

void write_samples_csv(std::ostream& os, const SampleBatch& samples, ColumnSplit split) {
  if (samples.cols() != split.total()) throw ContractViolation("column split does not match data");
  for (Index i = 0; i < split.dx; ++i) os << (i ? "," : "") << 'x' << i + 1;
  for (Index i = 0; i < split.dy; ++i) os << ",y" << i + 1;
  os << '\n';
  for (Index r = 0; r < samples.rows(); ++r) {
    for (Index c = 0; c < samples.cols(); ++c) {
      if (c) os << ',';
      os << csv::format_double(samples(r, c));
    }
    os << '\n';
  }
}

SampleBatch read_samples_csv(std::istream& is, ColumnSplit* split) {
  std::string line;
  if (!std::getline(is, line)) throw ContractViolation("sample CSV is empty");
  ColumnSplit found{0, 0};
  for (std::string_view name : csv::split_fields(line)) {
    if (!name.empty() && name.front() == 'x') {
      if (found.dy > 0) throw ContractViolation("x columns must precede y columns");
      ++found.dx;
    } else if (!name.empty() && name.front() == 'y') {
      ++found.dy;
    } else {
      throw ContractViolation("unexpected sample column '" + std::string(name) + "'");
    }
  }
  std::vector<double> values;
  Index rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = csv::split_fields(line);
    if (static_cast<Index>(fields.size()) != found.total()) {
      throw ContractViolation("sample CSV row " + std::to_string(rows + 1) + " has " +
                              std::to_string(fields.size()) + " fields");
    }
    for (auto f : fields) values.push_back(csv::parse_double(f));
    ++rows;
  }
  if (split) *split = found;
  SampleBatch out(rows, found.total());
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < found.total(); ++c) {
      out(r, c) = values[static_cast<std::size_t>(r * found.total() + c)];
    }
  }
  return out;
}

}  // namespace minee
