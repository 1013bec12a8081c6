#include "flexasm/linss.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "flexasm/error.hpp"

namespace flexasm::linss {

namespace {

int total_width(const std::vector<Channel>& channels) {
  int sum = 0;
  for (const auto& c : channels) {
    if (c.width < 0) fail(ErrorCode::WidthMismatch, "negative width on " + c.name);
    sum += c.width;
  }
  return sum;
}

void check_unique(const std::vector<Channel>& channels) {
  std::set<std::string> seen;
  for (const auto& c : channels) {
    if (!seen.insert(c.name).second) {
      fail(ErrorCode::DuplicateChannel, "channel '" + c.name + "' repeated");
    }
  }
}

int offset_of(const std::vector<Channel>& channels, const std::string& name) {
  int offset = 0;
  for (const auto& c : channels) {
    if (c.name == name) return offset;
    offset += c.width;
  }
  fail(ErrorCode::UnknownChannel, "no channel named '" + name + "'");
}

int width_of(const std::vector<Channel>& channels, const std::string& name) {
  for (const auto& c : channels) {
    if (c.name == name) return c.width;
  }
  fail(ErrorCode::UnknownChannel, "no channel named '" + name + "'");
}

std::vector<int> indices_of(const std::vector<Channel>& channels,
                            std::span<const std::string> names) {
  std::vector<int> idx;
  for (const auto& name : names) {
    const int off = offset_of(channels, name);
    const int w = width_of(channels, name);
    for (int i = 0; i < w; ++i) idx.push_back(off + i);
  }
  return idx;
}

std::vector<int> complement(int size, const std::vector<int>& taken) {
  std::vector<bool> used(size, false);
  for (int i : taken) used[i] = true;
  std::vector<int> rest;
  for (int i = 0; i < size; ++i) {
    if (!used[i]) rest.push_back(i);
  }
  return rest;
}

std::vector<Channel> channels_named(const std::vector<Channel>& channels,
                                    std::span<const std::string> names) {
  std::vector<Channel> out;
  for (const auto& name : names) out.push_back({name, width_of(channels, name)});
  return out;
}

std::vector<Channel> channels_except(const std::vector<Channel>& channels,
                                     std::span<const std::string> names) {
  std::vector<Channel> out;
  for (const auto& c : channels) {
    if (std::find(names.begin(), names.end(), c.name) == names.end()) {
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

StateSpace::StateSpace(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd C,
                       Eigen::MatrixXd D, std::vector<Channel> inputs,
                       std::vector<Channel> outputs)
    : A_(std::move(A)),
      B_(std::move(B)),
      C_(std::move(C)),
      D_(std::move(D)),
      inputs_(std::move(inputs)),
      outputs_(std::move(outputs)) {
  const auto n = A_.rows();
  if (A_.cols() != n || B_.rows() != n || C_.cols() != n ||
      D_.rows() != C_.rows() || D_.cols() != B_.cols()) {
    fail(ErrorCode::WidthMismatch, "inconsistent A/B/C/D dimensions");
  }
  if (total_width(inputs_) != B_.cols()) {
    fail(ErrorCode::WidthMismatch, "input channel widths do not sum to m");
  }
  if (total_width(outputs_) != C_.rows()) {
    fail(ErrorCode::WidthMismatch, "output channel widths do not sum to p");
  }
  check_unique(inputs_);
  check_unique(outputs_);
}

StateSpace StateSpace::gain(Eigen::MatrixXd D, std::vector<Channel> inputs,
                            std::vector<Channel> outputs) {
  const auto p = D.rows();
  const auto m = D.cols();
  return StateSpace(Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, m),
                    Eigen::MatrixXd(p, 0), std::move(D), std::move(inputs),
                    std::move(outputs));
}

bool StateSpace::has_input(const std::string& name) const {
  return std::any_of(inputs_.begin(), inputs_.end(),
                     [&](const Channel& c) { return c.name == name; });
}

bool StateSpace::has_output(const std::string& name) const {
  return std::any_of(outputs_.begin(), outputs_.end(),
                     [&](const Channel& c) { return c.name == name; });
}

int StateSpace::input_offset(const std::string& name) const {
  return offset_of(inputs_, name);
}
int StateSpace::output_offset(const std::string& name) const {
  return offset_of(outputs_, name);
}
int StateSpace::input_width(const std::string& name) const {
  return width_of(inputs_, name);
}
int StateSpace::output_width(const std::string& name) const {
  return width_of(outputs_, name);
}

StateSpace StateSpace::select(std::span<const std::string> inputs,
                              std::span<const std::string> outputs) const {
  const auto in_idx = indices_of(inputs_, inputs);
  const auto out_idx = indices_of(outputs_, outputs);
  return StateSpace(A_, B_(Eigen::all, in_idx), C_(out_idx, Eigen::all),
                    D_(out_idx, in_idx), channels_named(inputs_, inputs),
                    channels_named(outputs_, outputs));
}

StateSpace StateSpace::rename_input(const std::string& from,
                                    const std::string& to) const {
  auto ins = inputs_;
  bool found = false;
  for (auto& c : ins) {
    if (c.name == from) {
      c.name = to;
      found = true;
    }
  }
  if (!found) fail(ErrorCode::UnknownChannel, "no input named '" + from + "'");
  return StateSpace(A_, B_, C_, D_, std::move(ins), outputs_);
}

StateSpace StateSpace::rename_output(const std::string& from,
                                     const std::string& to) const {
  auto outs = outputs_;
  bool found = false;
  for (auto& c : outs) {
    if (c.name == from) {
      c.name = to;
      found = true;
    }
  }
  if (!found) fail(ErrorCode::UnknownChannel, "no output named '" + from + "'");
  return StateSpace(A_, B_, C_, D_, inputs_, std::move(outs));
}

StateSpace StateSpace::transform(const Eigen::MatrixXd& T) const {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(T);
  return StateSpace(lu.solve(A_ * T), lu.solve(B_), C_ * T, D_, inputs_,
                    outputs_);
}

// Stacked form: block outputs y, block inputs u, u = W y + E u_ext,
// y = Cb x + Db u, external outputs y_ext = F y.
StateSpace interconnect(std::span<const Block> blocks,
                        std::span<const Wire> wiring,
                        std::span<const ExternalInput> external_in,
                        std::span<const ExternalOutput> external_out) {
  std::map<std::string, int> index;
  std::vector<int> x_off, u_off, y_off;
  int n = 0, m = 0, p = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (!index.emplace(blocks[b].name, static_cast<int>(b)).second) {
      fail(ErrorCode::DuplicateChannel, "block '" + blocks[b].name + "' repeated");
    }
    x_off.push_back(n);
    u_off.push_back(m);
    y_off.push_back(p);
    n += blocks[b].sys.num_states();
    m += blocks[b].sys.num_inputs();
    p += blocks[b].sys.num_outputs();
  }

  struct Slice {
    int start;
    int width;
  };
  auto resolve = [&](const ChannelRef& ref, bool input) -> Slice {
    auto it = index.find(ref.block);
    if (it == index.end()) {
      fail(ErrorCode::UnknownChannel, "no block named '" + ref.block + "'");
    }
    const auto& sys = blocks[it->second].sys;
    const int off = input ? sys.input_offset(ref.channel)
                          : sys.output_offset(ref.channel);
    const int w = input ? sys.input_width(ref.channel)
                        : sys.output_width(ref.channel);
    const int count = ref.count < 0 ? w - ref.first : ref.count;
    if (ref.first < 0 || count < 0 || ref.first + count > w) {
      fail(ErrorCode::WidthMismatch,
           "slice out of range on " + ref.block + "." + ref.channel);
    }
    const int base = input ? u_off[it->second] : y_off[it->second];
    return {base + off + ref.first, count};
  };

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd Bb = Eigen::MatrixXd::Zero(n, m);
  Eigen::MatrixXd Cb = Eigen::MatrixXd::Zero(p, n);
  Eigen::MatrixXd Db = Eigen::MatrixXd::Zero(p, m);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& s = blocks[b].sys;
    A.block(x_off[b], x_off[b], s.num_states(), s.num_states()) = s.A();
    Bb.block(x_off[b], u_off[b], s.num_states(), s.num_inputs()) = s.B();
    Cb.block(y_off[b], x_off[b], s.num_outputs(), s.num_states()) = s.C();
    Db.block(y_off[b], u_off[b], s.num_outputs(), s.num_inputs()) = s.D();
  }

  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, p);
  for (const auto& wire : wiring) {
    const auto src = resolve(wire.from, false);
    const auto dst = resolve(wire.to, true);
    if (src.width != dst.width) {
      fail(ErrorCode::WidthMismatch,
           wire.from.block + "." + wire.from.channel + " (" +
               std::to_string(src.width) + ") -> " + wire.to.block + "." +
               wire.to.channel + " (" + std::to_string(dst.width) + ")");
    }
    W.block(dst.start, src.start, dst.width, src.width) +=
        wire.gain * Eigen::MatrixXd::Identity(dst.width, src.width);
  }

  std::vector<Channel> ext_in, ext_out;
  int me = 0, pe = 0;
  for (const auto& e : external_in) {
    ext_in.push_back(e.channel);
    me += e.channel.width;
  }
  for (const auto& e : external_out) {
    ext_out.push_back(e.channel);
    pe += e.channel.width;
  }

  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(m, me);
  int col = 0;
  for (const auto& e : external_in) {
    for (const auto& target : e.targets) {
      const auto dst = resolve(target, true);
      if (dst.width != e.channel.width) {
        fail(ErrorCode::WidthMismatch, "external input '" + e.channel.name +
                                           "' width differs from target " +
                                           target.block + "." + target.channel);
      }
      E.block(dst.start, col, dst.width, dst.width) +=
          Eigen::MatrixXd::Identity(dst.width, dst.width);
    }
    col += e.channel.width;
  }

  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(pe, p);
  int row = 0;
  for (const auto& e : external_out) {
    const auto src = resolve(e.source, false);
    if (src.width != e.channel.width) {
      fail(ErrorCode::WidthMismatch, "external output '" + e.channel.name +
                                         "' width differs from source " +
                                         e.source.block + "." + e.source.channel);
    }
    F.block(row, src.start, src.width, src.width) =
        Eigen::MatrixXd::Identity(src.width, src.width);
    row += e.channel.width;
  }

  Eigen::MatrixXd Yx(p, n), Yu(p, me);
  if (p > 0) {
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(p, p) - Db * W;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    if (!(lu.rcond() >= 1e-10)) {
      fail(ErrorCode::IllPosedLoop,
           "I - D W is singular (rcond " + std::to_string(lu.rcond()) + ")");
    }
    Yx = lu.solve(Cb);
    Yu = lu.solve(Db * E);
  }
  const Eigen::MatrixXd Ux = W * Yx;
  const Eigen::MatrixXd Uu = W * Yu + E;

  return StateSpace(A + Bb * Ux, Bb * Uu, F * Yx, F * Yu, std::move(ext_in),
                    std::move(ext_out));
}

StateSpace invert_channels(const StateSpace& sys,
                           std::span<const std::string> in_names,
                           std::span<const std::string> out_names,
                           double* condition) {
  const auto i1 = indices_of(sys.inputs(), in_names);
  const auto o1 = indices_of(sys.outputs(), out_names);
  if (i1.size() != o1.size()) {
    fail(ErrorCode::NonSquareSelection,
         "selected inputs (" + std::to_string(i1.size()) + ") and outputs (" +
             std::to_string(o1.size()) + ") differ in width");
  }
  const auto i2 = complement(sys.num_inputs(), i1);
  const auto o2 = complement(sys.num_outputs(), o1);

  const Eigen::MatrixXd D11 = sys.D()(o1, i1);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D11);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
  const double cond = smin > 0 ? smax / smin : INFINITY;
  if (condition) *condition = cond;
  if (sv.size() == 0 || smin <= 1e-12 * std::max(1.0, smax)) {
    fail(ErrorCode::SingularDBlock, "selected D block is singular");
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(D11);

  const Eigen::MatrixXd B1 = sys.B()(Eigen::all, i1);
  const Eigen::MatrixXd B2 = sys.B()(Eigen::all, i2);
  const Eigen::MatrixXd C1 = sys.C()(o1, Eigen::all);
  const Eigen::MatrixXd C2 = sys.C()(o2, Eigen::all);
  const Eigen::MatrixXd D12 = sys.D()(o1, i2);
  const Eigen::MatrixXd D21 = sys.D()(o2, i1);
  const Eigen::MatrixXd D22 = sys.D()(o2, i2);

  const Eigen::MatrixXd Dinv = lu.inverse();
  const Eigen::MatrixXd DiC1 = Dinv * C1;
  const Eigen::MatrixXd DiD12 = Dinv * D12;

  const int n = sys.num_states();
  const int m = sys.num_inputs();
  const int p = sys.num_outputs();
  const int k = static_cast<int>(i1.size());

  Eigen::MatrixXd A = sys.A() - B1 * DiC1;
  Eigen::MatrixXd B(n, m);
  B << B1 * Dinv, B2 - B1 * DiD12;
  Eigen::MatrixXd C(p, n);
  C << -DiC1, C2 - D21 * DiC1;
  Eigen::MatrixXd D(p, m);
  D.topLeftCorner(k, k) = Dinv;
  D.topRightCorner(k, m - k) = -DiD12;
  D.bottomLeftCorner(p - k, k) = D21 * Dinv;
  D.bottomRightCorner(p - k, m - k) = D22 - D21 * DiD12;

  auto new_in = channels_named(sys.outputs(), out_names);
  for (const auto& c : channels_except(sys.inputs(), in_names)) new_in.push_back(c);
  auto new_out = channels_named(sys.inputs(), in_names);
  for (const auto& c : channels_except(sys.outputs(), out_names)) new_out.push_back(c);
  return StateSpace(std::move(A), std::move(B), std::move(C), std::move(D),
                    std::move(new_in), std::move(new_out));
}

namespace {

StateSpace close_pair(const StateSpace& plant, const StateSpace& feedback,
                      const std::string& u_channel,
                      const std::string& y_channel) {
  const int wu = plant.input_width(u_channel);
  const int wy = plant.output_width(y_channel);
  if (feedback.num_inputs() != wy || feedback.num_outputs() != wu) {
    fail(ErrorCode::WidthMismatch,
         "feedback block is " + std::to_string(feedback.num_outputs()) + "x" +
             std::to_string(feedback.num_inputs()) + ", loop needs " +
             std::to_string(wu) + "x" + std::to_string(wy));
  }
  const StateSpace k = StateSpace(feedback.A(), feedback.B(), feedback.C(),
                                  feedback.D(), {{"in", wy}}, {{"out", wu}});
  const std::vector<Block> blocks{{"plant", plant}, {"fb", k}};
  const std::vector<Wire> wires{{{"plant", y_channel}, {"fb", "in"}},
                                {{"fb", "out"}, {"plant", u_channel}}};
  std::vector<ExternalInput> ins;
  for (const auto& c : plant.inputs()) {
    if (c.name != u_channel) ins.push_back({c, {{"plant", c.name}}});
  }
  std::vector<ExternalOutput> outs;
  for (const auto& c : plant.outputs()) {
    if (c.name != y_channel) outs.push_back({c, {"plant", c.name}});
  }
  return interconnect(blocks, wires, ins, outs);
}

}  // namespace

StateSpace lft_lower(const StateSpace& plant, const StateSpace& K,
                     const std::string& u_channel,
                     const std::string& y_channel) {
  return close_pair(plant, K, u_channel, y_channel);
}

StateSpace lft_upper(const StateSpace& plant, double delta,
                     const std::string& w_channel,
                     const std::string& z_channel) {
  const int w = plant.input_width(w_channel);
  if (plant.output_width(z_channel) != w) {
    fail(ErrorCode::WidthMismatch, "w and z channels differ in width");
  }
  const auto d = StateSpace::gain(delta * Eigen::MatrixXd::Identity(w, w),
                                  {{"in", w}}, {{"out", w}});
  return close_pair(plant, d, w_channel, z_channel);
}

FrequencyGrid::FrequencyGrid(std::vector<double> points)
    : points_(std::move(points)) {
  if (points_.empty()) fail(ErrorCode::InvalidArgument, "empty frequency grid");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i] > 0.0) || (i > 0 && !(points_[i] > points_[i - 1]))) {
      fail(ErrorCode::InvalidArgument,
           "frequency grid must be positive and strictly increasing");
    }
  }
}

FrequencyGrid FrequencyGrid::logspace(double w_min, double w_max, int count) {
  if (count < 1 || !(w_min > 0) || !(w_max >= w_min)) {
    fail(ErrorCode::InvalidArgument, "bad logspace bounds");
  }
  std::vector<double> pts(count);
  const double a = std::log10(w_min), b = std::log10(w_max);
  for (int i = 0; i < count; ++i) {
    pts[i] = count == 1 ? w_min : std::pow(10.0, a + (b - a) * i / (count - 1));
  }
  return FrequencyGrid(std::move(pts));
}

Eigen::MatrixXcd evaluate(const StateSpace& sys, std::complex<double> s) {
  const int n = sys.num_states();
  Eigen::MatrixXcd G = sys.D().cast<std::complex<double>>();
  if (n == 0) return G;
  Eigen::MatrixXcd M = -sys.A().cast<std::complex<double>>();
  M.diagonal().array() += s;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
  G += sys.C().cast<std::complex<double>>() *
       lu.solve(sys.B().cast<std::complex<double>>());
  return G;
}

FrequencyResponse freq_response(const StateSpace& sys,
                                const FrequencyGrid& grid) {
  FrequencyResponse out;
  Eigen::VectorXcd poles;
  if (sys.num_states() > 0) poles = sys.A().eigenvalues();
  for (double w : grid.points()) {
    const std::complex<double> s(0.0, w);
    bool at_pole = false;
    for (Eigen::Index i = 0; i < poles.size(); ++i) {
      if (std::abs(poles(i) - s) < 1e-12) at_pole = true;
    }
    if (at_pole) {
      out.skipped.push_back(w);
      continue;
    }
    out.omega.push_back(w);
    out.values.push_back(evaluate(sys, s));
  }
  return out;
}

double sigma_max(const Eigen::MatrixXcd& G) {
  if (G.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(G);
  return svd.singularValues()(0);
}

Stability is_stable(const StateSpace& sys) {
  if (sys.num_states() == 0) return {true, -INFINITY};
  const Eigen::VectorXcd ev = sys.A().eigenvalues();
  double abscissa = -INFINITY;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    abscissa = std::max(abscissa, ev(i).real());
  }
  return {abscissa < -1e-10, abscissa};
}

namespace {

// Orthonormal basis of the Krylov space spanned by [B, AB, A^2B, ...].
Eigen::MatrixXd krylov_basis(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             double tol) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd V(n, 0);
  const double a_scale = std::max(A.norm(), 1e-300);
  auto absorb = [&](Eigen::MatrixXd cand, double scale) {
    const int before = static_cast<int>(V.cols());
    for (int c = 0; c < cand.cols(); ++c) {
      Eigen::VectorXd v = cand.col(c);
      for (int pass = 0; pass < 2; ++pass) {
        if (V.cols()) v -= V * (V.transpose() * v);
      }
      const double nv = v.norm();
      if (nv > tol * scale && V.cols() < n) {
        V.conservativeResize(Eigen::NoChange, V.cols() + 1);
        V.col(V.cols() - 1) = v / nv;
      }
    }
    return static_cast<int>(V.cols()) - before;
  };
  int added = absorb(B, std::max(B.norm(), 1e-300));
  int start = 0;
  while (added > 0 && V.cols() < n) {
    const Eigen::MatrixXd last = V.middleCols(start, added);
    start = static_cast<int>(V.cols());
    added = absorb(A * last, a_scale);
  }
  return V;
}

}  // namespace

StateSpace minimal_stable_projection(const StateSpace& sys,
                                     const std::string& input,
                                     const std::string& output) {
  const std::vector<std::string> in{input}, out{output};
  const StateSpace s = sys.select(in, out);
  constexpr double kTol = 1e-8;
  StateSpace reduced = s;
  if (s.num_states() > 0) {
    const Eigen::MatrixXd V = krylov_basis(s.A(), s.B(), kTol);
    Eigen::MatrixXd Ac = V.transpose() * s.A() * V;
    Eigen::MatrixXd Bc = V.transpose() * s.B();
    Eigen::MatrixXd Cc = s.C() * V;
    Eigen::MatrixXd Wo = krylov_basis(Ac.transpose(), Cc.transpose(), kTol);
    reduced = StateSpace(Wo.transpose() * Ac * Wo, Wo.transpose() * Bc, Cc * Wo,
                         s.D(), s.inputs(), s.outputs());
  }
  const auto st = is_stable(reduced);
  if (reduced.num_states() > 0 && !st.stable) {
    fail(ErrorCode::MarginalModeObservable,
         input + " -> " + output + " retains a mode with real part " +
             std::to_string(st.abscissa));
  }
  return reduced;
}

Eigen::MatrixXd lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  using cd = std::complex<double>;
  const int n = static_cast<int>(A.rows());
  if (n == 0) return Eigen::MatrixXd(0, 0);
  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(A.cast<cd>());
  if (schur.info() != Eigen::Success) {
    fail(ErrorCode::EigenFailure, "Schur decomposition failed");
  }
  const Eigen::MatrixXcd& T = schur.matrixT();
  const Eigen::MatrixXcd& U = schur.matrixU();
  const Eigen::MatrixXcd Cm = -(U.adjoint() * Q.cast<cd>() * U);
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
  for (int k = n - 1; k >= 0; --k) {
    Eigen::VectorXcd rhs = Cm.col(k);
    for (int l = k + 1; l < n; ++l) rhs -= std::conj(T(k, l)) * Y.col(l);
    Eigen::MatrixXcd M = T;
    M.diagonal().array() += std::conj(T(k, k));
    Y.col(k) = M.triangularView<Eigen::Upper>().solve(rhs);
  }
  const Eigen::MatrixXd X = (U * Y * U.adjoint()).real();
  return 0.5 * (X + X.transpose());
}

}  // namespace flexasm::linss
