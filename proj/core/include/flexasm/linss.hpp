#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace flexasm::linss {

struct Channel {
  std::string name;
  int width = 0;
};

/// Continuous-time LTI model with named input and output channel groups.
class StateSpace {
 public:
  StateSpace() = default;
  StateSpace(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd C,
             Eigen::MatrixXd D, std::vector<Channel> inputs,
             std::vector<Channel> outputs);

  /// Memoryless system y = D u.
  static StateSpace gain(Eigen::MatrixXd D, std::vector<Channel> inputs,
                         std::vector<Channel> outputs);

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& B() const { return B_; }
  const Eigen::MatrixXd& C() const { return C_; }
  const Eigen::MatrixXd& D() const { return D_; }
  const std::vector<Channel>& inputs() const { return inputs_; }
  const std::vector<Channel>& outputs() const { return outputs_; }

  int num_states() const { return static_cast<int>(A_.rows()); }
  int num_inputs() const { return static_cast<int>(B_.cols()); }
  int num_outputs() const { return static_cast<int>(C_.rows()); }

  bool has_input(const std::string& name) const;
  bool has_output(const std::string& name) const;
  int input_offset(const std::string& name) const;
  int output_offset(const std::string& name) const;
  int input_width(const std::string& name) const;
  int output_width(const std::string& name) const;

  /// Keeps the named channels in the given order.
  StateSpace select(std::span<const std::string> inputs,
                    std::span<const std::string> outputs) const;

  StateSpace rename_input(const std::string& from, const std::string& to) const;
  StateSpace rename_output(const std::string& from,
                           const std::string& to) const;

  /// Similarity transform x = T x'.
  StateSpace transform(const Eigen::MatrixXd& T) const;

 private:
  Eigen::MatrixXd A_, B_, C_, D_;
  std::vector<Channel> inputs_, outputs_;
};

/// Reference to a slice of a block channel.  count < 0 means the whole
/// channel starting at first.
struct ChannelRef {
  std::string block;
  std::string channel;
  int first = 0;
  int count = -1;
};

struct Wire {
  ChannelRef from;  // block output
  ChannelRef to;    // block input
  double gain = 1.0;
};

struct ExternalInput {
  Channel channel;
  std::vector<ChannelRef> targets;
};

struct ExternalOutput {
  Channel channel;
  ChannelRef source;
};

struct Block {
  std::string name;
  StateSpace sys;
};

/// Closes the wiring between blocks.  Several wires into the same input are
/// summed; unconnected block inputs are held at zero.
StateSpace interconnect(std::span<const Block> blocks,
                        std::span<const Wire> wiring,
                        std::span<const ExternalInput> external_in,
                        std::span<const ExternalOutput> external_out);

/// Swaps the roles of the selected input and output channels.  The selected
/// outputs become the leading inputs and the selected inputs become the
/// leading outputs.  If condition is non-null it receives cond(D_sel).
StateSpace invert_channels(const StateSpace& sys,
                           std::span<const std::string> in_names,
                           std::span<const std::string> out_names,
                           double* condition = nullptr);

/// F_l(plant, K) with K fed by y_channel and driving u_channel.
StateSpace lft_lower(const StateSpace& plant, const StateSpace& K,
                     const std::string& u_channel,
                     const std::string& y_channel);

/// F_u(plant, delta * I) closing z_channel -> w_channel.
StateSpace lft_upper(const StateSpace& plant, double delta,
                     const std::string& w_channel,
                     const std::string& z_channel);

class FrequencyGrid {
 public:
  explicit FrequencyGrid(std::vector<double> points);
  static FrequencyGrid logspace(double w_min, double w_max, int count);

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }

 private:
  std::vector<double> points_;
};

struct FrequencyResponse {
  std::vector<double> omega;
  std::vector<Eigen::MatrixXcd> values;
  std::vector<double> skipped;  // points within 1e-12 of a pole
};

Eigen::MatrixXcd evaluate(const StateSpace& sys, std::complex<double> s);
FrequencyResponse freq_response(const StateSpace& sys,
                                const FrequencyGrid& grid);
double sigma_max(const Eigen::MatrixXcd& G);

struct Stability {
  bool stable = false;
  double abscissa = 0.0;
};

Stability is_stable(const StateSpace& sys);

/// Removes states that are uncontrollable from `input` or unobservable from
/// `output` and returns the input->output subsystem.
StateSpace minimal_stable_projection(const StateSpace& sys,
                                     const std::string& input,
                                     const std::string& output);

double hinf_norm(const StateSpace& sys);
double h2_norm(const StateSpace& sys);

/// Solves A X + X A^T + Q = 0 for stable A.
Eigen::MatrixXd lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q);

}  // namespace flexasm::linss
