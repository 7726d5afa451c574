#include "minee/mi_network.hpp"

#include "minee/errors.hpp"
#include "minee/rng.hpp"

namespace minee {

nn::NetworkSpec MINetworkSpec::head_spec(Head h) const {
  nn::NetworkSpec s;
  s.input_dim = h == Head::Joint ? split.total() : (h == Head::X ? split.dx : split.dy);
  s.hidden_widths = hidden_widths;
  s.output_dim = 1;
  s.activation = activation;
  return s;
}

Index MINetworkSpec::parameter_count() const {
  Index n = 0;
  for (Head h : kAllHeads) n += head_spec(h).parameter_count();
  return n;
}

Vector MIParams::flatten() const {
  Vector flat(parameter_count());
  Index offset = 0;
  for (const auto& p : heads) {
    flat.segment(offset, p.values.size()) = p.values;
    offset += p.values.size();
  }
  return flat;
}

void MIParams::assign_flat(const Vector& flat) {
  if (flat.size() != parameter_count()) throw ContractViolation("flat parameter length mismatch");
  Index offset = 0;
  for (auto& p : heads) {
    p.values = flat.segment(offset, p.values.size());
    offset += p.values.size();
  }
}

Index MIParams::parameter_count() const {
  Index n = 0;
  for (const auto& p : heads) n += p.values.size();
  return n;
}

MIParams init_mi_params(const MINetworkSpec& spec, std::uint64_t seed) {
  MIParams p;
  p.split = spec.split;
  for (Head h : kAllHeads) {
    p.head(h) = nn::init_params(spec.head_spec(h), derive_seed(seed, static_cast<std::uint64_t>(h)));
  }
  return p;
}

SampleBatch head_inputs(const SampleBatch& rows, ColumnSplit split, Head h) {
  if (rows.cols() != split.total()) {
    throw ContractViolation("joint rows have " + std::to_string(rows.cols()) +
                            " columns, expected " + std::to_string(split.total()));
  }
  switch (h) {
    case Head::Joint:
      return rows;
    case Head::X:
      return rows.leftCols(split.dx);
    case Head::Y:
      return rows.rightCols(split.dy);
  }
  return rows;
}

}  // namespace minee
