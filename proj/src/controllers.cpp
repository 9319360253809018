#include "flock/controllers.hpp"

#include <cmath>
#include <random>
#include <string>

#include "flock/errors.hpp"

namespace flock {

namespace {

Matrix tanh_of(const Matrix& m) { return m.array().tanh().matrix(); }

// Derivative of tanh expressed through its output.
Matrix tanh_backward(const Matrix& grad, const Matrix& out) {
  return (grad.array() * (1.0 - out.array().square())).matrix();
}

Matrix readout(const ControllerParams& p, const Matrix& activation) {
  Matrix u = activation * p.readout_weight;
  u.rowwise() += p.readout_bias.row(0);
  return u;
}

void fill_uniform(Matrix& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
}

void fill_bank(FilterBank& bank, std::mt19937_64& rng) {
  const double bound =
      1.0 / std::sqrt(static_cast<double>(bank.size()) *
                      static_cast<double>(bank.in_features()));
  for (Matrix& tap : bank.taps) fill_uniform(tap, bound, rng);
}

void check_bank(const FilterBank& bank, Eigen::Index in, Eigen::Index out,
                std::size_t taps, const char* name) {
  if (bank.size() != taps)
    throw InvalidArgument(std::string(name) + " bank has wrong tap count");
  for (const Matrix& m : bank.taps)
    if (m.rows() != in || m.cols() != out)
      throw InvalidArgument(std::string(name) + " bank has wrong shape");
}

std::vector<Matrix> copy_taps(const AggregationBuffer& buffer) {
  return {buffer.all_taps().begin(), buffer.all_taps().end()};
}

void check_sequence(const GraphSequence& graphs, std::span<const Matrix> features) {
  if (graphs.length() != features.size())
    throw InvalidArgument("forward: graph and feature sequences differ in length");
}

}  // namespace

std::string_view to_string(Arch arch) {
  switch (arch) {
    case Arch::GC:
      return "gc";
    case Arch::GCNN:
      return "gcnn";
    case Arch::GRNN:
      return "grnn";
  }
  return "unknown";
}

Arch parse_arch(std::string_view name) {
  if (name == "gc" || name == "GC") return Arch::GC;
  if (name == "gcnn" || name == "GCNN") return Arch::GCNN;
  if (name == "grnn" || name == "GRNN") return Arch::GRNN;
  throw InvalidArgument("unknown architecture '" + std::string(name) + "'");
}

FilterBank FilterBank::zeros(std::size_t taps, Eigen::Index in, Eigen::Index out) {
  return FilterBank{std::vector<Matrix>(taps, Matrix::Zero(in, out))};
}

void ControllerParams::validate() const {
  if (!(tap_gain > 0) || !std::isfinite(tap_gain))
    throw InvalidArgument("tap gain must be positive and finite");
  const std::size_t k = taps();
  if (k == 0) throw InvalidArgument("controller needs at least one tap");
  const Eigen::Index g = input.out_features();
  if (g <= 0) throw InvalidArgument("controller needs at least one feature");
  check_bank(input, input.in_features(), g, k, "input");
  if (readout_weight.rows() != g || readout_weight.cols() != kActionDim)
    throw InvalidArgument("readout weight has wrong shape");
  if (readout_bias.rows() != 1 || readout_bias.cols() != kActionDim)
    throw InvalidArgument("readout bias has wrong shape");
  if (arch == Arch::GRNN) {
    if (!hidden || !output) throw InvalidArgument("GRNN needs hidden and output banks");
    check_bank(*hidden, g, g, k, "hidden");
    check_bank(*output, g, g, k, "output");
  } else if (hidden || output) {
    throw InvalidArgument("only GRNN carries hidden and output banks");
  }
}

ControllerParams ControllerParams::zeros_like() const {
  ControllerParams z = *this;
  for (Matrix* m : z.tensors()) m->setZero();
  return z;
}

std::size_t ControllerParams::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* m : tensors()) n += static_cast<std::size_t>(m->size());
  return n;
}

std::vector<Matrix*> ControllerParams::tensors() {
  std::vector<Matrix*> out;
  for (Matrix& m : input.taps) out.push_back(&m);
  if (hidden)
    for (Matrix& m : hidden->taps) out.push_back(&m);
  if (output)
    for (Matrix& m : output->taps) out.push_back(&m);
  out.push_back(&readout_weight);
  out.push_back(&readout_bias);
  return out;
}

std::vector<const Matrix*> ControllerParams::tensors() const {
  std::vector<const Matrix*> out;
  for (Matrix* m : const_cast<ControllerParams*>(this)->tensors()) out.push_back(m);
  return out;
}

ControllerParams init_params(Arch arch, std::size_t features, std::size_t taps,
                             std::uint64_t seed, double tap_gain) {
  if (features == 0 || taps == 0)
    throw InvalidArgument("init_params: G and K must be positive");
  if (!(tap_gain > 0)) throw InvalidArgument("init_params: tap gain must be positive");
  const auto g = static_cast<Eigen::Index>(features);
  std::mt19937_64 rng(seed);

  ControllerParams p;
  p.arch = arch;
  p.tap_gain = tap_gain;
  p.input = FilterBank::zeros(taps, kFeatureDim, g);
  fill_bank(p.input, rng);
  if (arch == Arch::GRNN) {
    p.hidden = FilterBank::zeros(taps, g, g);
    fill_bank(*p.hidden, rng);
    p.output = FilterBank::zeros(taps, g, g);
    fill_bank(*p.output, rng);
  }
  p.readout_weight = Matrix::Zero(g, kActionDim);
  fill_uniform(p.readout_weight, 1.0 / std::sqrt(static_cast<double>(g)), rng);
  p.readout_bias = Matrix::Zero(1, kActionDim);
  return p;
}

namespace {
void scale_taps(FilterBank& bank, double gain) {
  double f = 1.0;
  for (Matrix& m : bank.taps) {
    m *= f;
    f *= gain;
  }
}
}  // namespace

ControllerParams effective_coefficients(const ControllerParams& params) {
  ControllerParams out = params;
  if (params.tap_gain != 1.0) {
    scale_taps(out.input, params.tap_gain);
    if (out.hidden) scale_taps(*out.hidden, params.tap_gain);
    if (out.output) scale_taps(*out.output, params.tap_gain);
  }
  out.tap_gain = 1.0;
  return out;
}

Matrix graph_conv(const FilterBank& bank, const AggregationBuffer& buffer) {
  if (bank.size() != buffer.taps())
    throw InvalidArgument("graph_conv: bank has " + std::to_string(bank.size()) +
                          " taps, buffer has " + std::to_string(buffer.taps()));
  if (bank.in_features() != buffer.features())
    throw InvalidArgument("graph_conv: feature dimension mismatch");
  Matrix out = Matrix::Zero(buffer.agents(), bank.out_features());
  for (std::size_t k = 0; k < bank.size(); ++k)
    out.noalias() += buffer.tap(k) * bank.taps[k];
  return out;
}

Policy::Policy(const ControllerParams& params, std::size_t agents)
    : params_(effective_coefficients(params)), agents_(static_cast<Eigen::Index>(agents)) {
  params_.validate();
  const std::size_t k = params_.taps();
  input_buffer_ = AggregationBuffer(k, agents_, params_.input.in_features());
  if (params_.arch == Arch::GRNN) {
    const Eigen::Index h = params_.hidden_features();
    hidden_buffer_ = AggregationBuffer(k, agents_, h);
    output_buffer_ = AggregationBuffer(k, agents_, h);
    previous_hidden_ = Matrix::Zero(agents_, h);
  }
}

Matrix Policy::step(const GraphSnapshot& graph, const Matrix& features,
                    ForwardTape* tape) {
  input_buffer_.advance(graph, features);
  TapeStep record;
  Matrix activation;

  switch (params_.arch) {
    case Arch::GC:
      activation = graph_conv(params_.input, input_buffer_);
      break;
    case Arch::GCNN:
      activation = tanh_of(graph_conv(params_.input, input_buffer_));
      break;
    case Arch::GRNN: {
      hidden_buffer_.advance(graph, previous_hidden_);
      Matrix pre = graph_conv(params_.input, input_buffer_);
      pre.noalias() += graph_conv(*params_.hidden, hidden_buffer_);
      Matrix z = tanh_of(pre);
      output_buffer_.advance(graph, z);
      activation = tanh_of(graph_conv(*params_.output, output_buffer_));
      if (tape) {
        record.hidden_taps = copy_taps(hidden_buffer_);
        record.output_taps = copy_taps(output_buffer_);
        record.hidden = z;
      }
      previous_hidden_ = std::move(z);
      break;
    }
  }

  Matrix actions = readout(params_, activation);
  if (tape) {
    if (tape->steps.empty()) {
      tape->arch = params_.arch;
      tape->taps = params_.taps();
      tape->features = params_.features();
      tape->agents = agents_;
    }
    record.graph = graph;
    record.input_taps = copy_taps(input_buffer_);
    record.activation = std::move(activation);
    tape->steps.push_back(std::move(record));
  }
  return actions;
}

ForwardResult forward(const ControllerParams& params, const GraphSequence& graphs,
                      std::span<const Matrix> features) {
  check_sequence(graphs, features);
  ForwardResult result;
  Policy policy(params, graphs.agents());
  result.actions.reserve(graphs.length());
  result.tape.steps.reserve(graphs.length());
  for (std::size_t t = 0; t < graphs.length(); ++t)
    result.actions.push_back(policy.step(graphs[t], features[t], &result.tape));
  return result;
}

namespace {
ForwardResult forward_as(Arch expected, const ControllerParams& params,
                         const GraphSequence& graphs,
                         std::span<const Matrix> features) {
  if (params.arch != expected)
    throw InvalidState("forward_" + std::string(to_string(expected)) +
                       " called with " + std::string(to_string(params.arch)) +
                       " parameters");
  return forward(params, graphs, features);
}
}  // namespace

ForwardResult forward_gc(const ControllerParams& params, const GraphSequence& graphs,
                         std::span<const Matrix> features) {
  return forward_as(Arch::GC, params, graphs, features);
}

ForwardResult forward_gcnn(const ControllerParams& params,
                           const GraphSequence& graphs,
                           std::span<const Matrix> features) {
  return forward_as(Arch::GCNN, params, graphs, features);
}

ForwardResult forward_grnn(const ControllerParams& params,
                           const GraphSequence& graphs,
                           std::span<const Matrix> features) {
  return forward_as(Arch::GRNN, params, graphs, features);
}

ControllerParams backward(const ControllerParams& stored, const ForwardTape& tape,
                          std::span<const Matrix> action_grads) {
  const ControllerParams params = effective_coefficients(stored);
  if (tape.arch != stored.arch || tape.taps != stored.taps() ||
      tape.features != stored.features())
    throw InvalidState("backward: tape was recorded with different parameters");
  if (action_grads.size() != tape.length())
    throw InvalidState("backward: gradient count does not match tape length");

  ControllerParams grad = params.zeros_like();
  const std::size_t k_taps = params.taps();
  const std::size_t steps = tape.length();

  // Adjoints of the hidden and output buffers flowing back from step t+1:
  // carry[k] is S(t+1)^T times the adjoint of tap k+1 at t+1.
  std::vector<Matrix> carry_hidden, carry_output;
  Matrix hidden_from_future;
  if (params.arch == Arch::GRNN) {
    const Eigen::Index h = params.hidden_features();
    carry_hidden.assign(k_taps, Matrix::Zero(tape.agents, h));
    carry_output.assign(k_taps, Matrix::Zero(tape.agents, h));
    hidden_from_future = Matrix::Zero(tape.agents, h);
  }

  for (std::size_t t = steps; t-- > 0;) {
    const TapeStep& rec = tape.steps[t];
    const Matrix& du = action_grads[t];
    if (du.rows() != tape.agents || du.cols() != kActionDim)
      throw InvalidState("backward: action gradient has wrong shape");

    grad.readout_weight.noalias() += rec.activation.transpose() * du;
    grad.readout_bias += du.colwise().sum();
    Matrix d_act = du * params.readout_weight.transpose();

    if (params.arch == Arch::GC || params.arch == Arch::GCNN) {
      const Matrix d_pre = params.arch == Arch::GC
                               ? d_act
                               : tanh_backward(d_act, rec.activation);
      for (std::size_t k = 0; k < k_taps; ++k)
        grad.input.taps[k].noalias() += rec.input_taps[k].transpose() * d_pre;
      continue;
    }

    // GRNN: readout <- tanh <- output conv <- Z(t) <- tanh <- input + hidden conv.
    const Matrix d_out_pre = tanh_backward(d_act, rec.activation);
    std::vector<Matrix> adj_output(k_taps);
    for (std::size_t k = 0; k < k_taps; ++k) {
      grad.output->taps[k].noalias() += rec.output_taps[k].transpose() * d_out_pre;
      adj_output[k] = d_out_pre * params.output->taps[k].transpose() + carry_output[k];
    }

    const Matrix d_z = adj_output[0] + hidden_from_future;
    const Matrix d_hidden_pre = tanh_backward(d_z, rec.hidden);
    std::vector<Matrix> adj_hidden(k_taps);
    for (std::size_t k = 0; k < k_taps; ++k) {
      grad.input.taps[k].noalias() += rec.input_taps[k].transpose() * d_hidden_pre;
      grad.hidden->taps[k].noalias() += rec.hidden_taps[k].transpose() * d_hidden_pre;
      adj_hidden[k] = d_hidden_pre * params.hidden->taps[k].transpose() + carry_hidden[k];
    }

    // Hidden tap 0 at t is Z(t-1).
    hidden_from_future = adj_hidden[0];
    for (std::size_t k = 0; k + 1 < k_taps; ++k) {
      carry_output[k] = shift_adjoint(rec.graph, adj_output[k + 1]);
      carry_hidden[k] = shift_adjoint(rec.graph, adj_hidden[k + 1]);
    }
    carry_output[k_taps - 1].setZero();
    carry_hidden[k_taps - 1].setZero();
  }
  // Chain rule through the tap gain: dL/dstored_k = gain^k dL/deffective_k.
  grad.tap_gain = stored.tap_gain;
  ControllerParams scaled = effective_coefficients(grad);
  scaled.tap_gain = stored.tap_gain;
  return scaled;
}

}  // namespace flock
