#include "foldgraph/network.hpp"

#include <cmath>
#include <string>
#include <tuple>

#include "foldgraph/errors.hpp"

namespace foldgraph {

std::string_view filter_name(FilterKind kind) noexcept {
  switch (kind) {
    case FilterKind::none: return "none";
    case FilterKind::adjacency: return "adjacency";
    case FilterKind::laplacian: return "laplacian";
  }
  return "none";
}

FilterKind parse_filter(std::string_view name) {
  if (name == "none") return FilterKind::none;
  if (name == "adjacency") return FilterKind::adjacency;
  if (name == "laplacian") return FilterKind::laplacian;
  throw DomainError("unknown filter '" + std::string(name) + "' (expected none|adjacency|laplacian)");
}

std::string_view loss_name(LossKind kind) noexcept {
  return kind == LossKind::augmented ? "augcd" : "cd";
}

LossKind parse_loss(std::string_view name) {
  if (name == "augcd" || name == "augmented") return LossKind::augmented;
  if (name == "cd" || name == "plain") return LossKind::plain;
  throw DomainError("unknown loss '" + std::string(name) + "' (expected augcd|cd)");
}

// ---- MlpStack ------------------------------------------------------------------------------

MlpStack::MlpStack(std::size_t in_dim, const std::vector<std::size_t>& widths, Activation last,
                   Rng& rng) {
  if (widths.empty()) throw DomainError("an MLP needs at least one layer");
  std::size_t fan_in = in_dim;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::size_t fan_out = widths[l];
    if (fan_in == 0 || fan_out == 0) throw DomainError("MLP widths must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_out * fan_in);
    for (double& x : w) x = rng.uniform(-bound, bound);
    layers_.push_back(DenseLayer{ad::Tensor::leaf({fan_out, fan_in}, std::move(w)),
                                 ad::Tensor::leaf({fan_out}),
                                 l + 1 == widths.size() ? last : Activation::relu});
    fan_in = fan_out;
  }
}

ad::Tensor MlpStack::forward(ad::Tape& tape, const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (const DenseLayer& layer : layers_) {
    h = tape.add_row_vector(tape.matmul(h, tape.transpose(layer.weight)), layer.bias);
    if (layer.activation == Activation::relu) h = tape.relu(h);
  }
  return h;
}

// ---- ModelConfig ---------------------------------------------------------------------------

void ModelConfig::validate() const {
  auto positive = [](const std::vector<std::size_t>& ws, const char* what) {
    for (const std::size_t w : ws)
      if (w == 0) throw DomainError(std::string(what) + " widths must be positive");
  };
  if (code_len == 0) throw DomainError("code_len must be positive");
  if (lattice_side == 0) throw DomainError("lattice_side must be positive");
  if (fold_inner_dim == 0 || topo_hidden == 0) throw DomainError("widths must be positive");
  if (encoder_point_widths.empty()) throw DomainError("encoder point MLP needs at least one layer");
  positive(encoder_point_widths, "encoder point");
  positive(encoder_code_widths, "encoder code");
  positive(fold_widths, "fold");
  if (knn_k == 0 || knn_k >= lattice_size()) {
    throw DomainError("knn_k must satisfy 1 <= k < M (k = " + std::to_string(knn_k) + ", M = " +
                      std::to_string(lattice_size()) + ")");
  }
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
  if (!(mu > 0.0)) throw DomainError("mu must be positive");
}

// ---- Model ---------------------------------------------------------------------------------

namespace {

std::vector<std::size_t> with_output(std::vector<std::size_t> hidden, std::size_t out) {
  hidden.push_back(out);
  return hidden;
}

void register_stack(std::vector<std::pair<std::string, ad::Tensor>>& params, const std::string& name,
                    const MlpStack& stack) {
  for (std::size_t l = 0; l < stack.layers().size(); ++l) {
    params.emplace_back(name + "." + std::to_string(l) + ".weight", stack.layers()[l].weight);
    params.emplace_back(name + "." + std::to_string(l) + ".bias", stack.layers()[l].bias);
  }
}

}  // namespace

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  lattice_ = Lattice2D(cfg_.lattice_side);
  a0_ = build_initial_adjacency(lattice_, cfg_.knn_k, cfg_.sigma);
  lattice_nodes_ = ad::Tensor::leaf(lattice_.nodes());
  a0_tensor_ = ad::Tensor::leaf(a0_);

  const std::size_t c = cfg_.code_len, m = cfg_.lattice_size();
  Rng rng(seed);
  enc_point_ = MlpStack(3, cfg_.encoder_point_widths, Activation::relu, rng);
  enc_code_ = MlpStack(enc_point_.out_dim(), with_output(cfg_.encoder_code_widths, c),
                       Activation::none, rng);
  fold1_ = MlpStack(2 + c, with_output(cfg_.fold_widths, cfg_.fold_inner_dim), Activation::none, rng);
  fold2_ = MlpStack(cfg_.fold_inner_dim + c, with_output(cfg_.fold_widths, 3), Activation::none, rng);
  topo1_ = MlpStack(m + c, {cfg_.topo_hidden}, Activation::relu, rng);
  topo2_ = MlpStack(cfg_.topo_hidden + c, {m}, Activation::relu, rng);

  register_stack(params_, "encoder_point", enc_point_);
  register_stack(params_, "encoder_code", enc_code_);
  register_stack(params_, "fold1", fold1_);
  register_stack(params_, "fold2", fold2_);
  register_stack(params_, "topo1", topo1_);
  register_stack(params_, "topo2", topo2_);
}

std::size_t Model::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

ad::Tensor Model::encode(ad::Tape& tape, const Matrix& points) const {
  if (points.rows() == 0) throw DomainError("encode: empty point cloud");
  if (points.cols() != 3) throw DimensionError("encode: expected N x 3 points, got " + points.shape_string());
  const ad::Tensor x = ad::Tensor::leaf(points);
  const ad::Tensor features = enc_point_.forward(tape, x);
  const ad::Tensor pooled = tape.reshape(tape.maxpool_over_points(features), {1, features.cols()});
  return enc_code_.forward(tape, pooled);
}

ad::Tensor Model::fold(ad::Tape& tape, const ad::Tensor& code) const {
  const std::size_t m = cfg_.lattice_size();
  const ad::Tensor c = tape.broadcast_rows(code, m);
  const ad::Tensor u = fold1_.forward(tape, tape.concat_cols(lattice_nodes_, c));
  return fold2_.forward(tape, tape.concat_cols(u, c));
}

std::pair<ad::Tensor, ad::Tensor> Model::infer_topology(ad::Tape& tape, const ad::Tensor& code) const {
  const std::size_t m = cfg_.lattice_size();
  const ad::Tensor c = tape.broadcast_rows(code, m);
  const ad::Tensor h = topo1_.forward(tape, tape.concat_cols(a0_tensor_, c));
  const ad::Tensor raw = tape.softmax_rows(topo2_.forward(tape, tape.concat_cols(h, c)));
  return {raw, tape.symmetrize(raw)};
}

ForwardPass Model::forward(ad::Tape& tape, const Matrix& points) const {
  ForwardPass out;
  out.code = encode(tape, points);
  out.coarse = fold(tape, out.code);
  if (cfg_.filter == FilterKind::none) {
    out.adjacency = a0_tensor_;
    out.refined = out.coarse;
    return out;
  }
  std::tie(out.adjacency_raw, out.adjacency) = infer_topology(tape, out.code);
  out.refined = apply_filter(tape, cfg_.filter, out.adjacency, out.coarse, cfg_.mu);
  return out;
}

std::vector<double> Model::encode(const PointCloud& cloud) const {
  ad::Tape tape;
  const ad::Tensor code = encode(tape, cloud.points());
  return {code.values().begin(), code.values().end()};
}

Reconstruction Model::reconstruct(const PointCloud& cloud) const {
  ad::Tape tape;
  const ForwardPass fp = forward(tape, cloud.points());
  return Reconstruction{{fp.code.values().begin(), fp.code.values().end()},
                        PointCloud(fp.coarse.to_matrix()),
                        PointCloud(fp.refined.to_matrix()),
                        fp.adjacency.to_matrix()};
}

ad::Tensor apply_filter(ad::Tape& tape, FilterKind kind, const ad::Tensor& adjacency,
                        const ad::Tensor& coarse, double mu) {
  switch (kind) {
    case FilterKind::none:
      return coarse;
    case FilterKind::adjacency:
      return tape.scale(tape.add(coarse, tape.matmul(adjacency, coarse)), 0.5);
    case FilterKind::laplacian:
      if (!(mu > 0.0)) throw DomainError("mu must be positive");
      return tape.spd_solve(tape.add_identity(tape.laplacian(adjacency), mu), coarse);
  }
  return coarse;
}

ad::Tensor chamfer_loss(ad::Tape& tape, const Matrix& source, const ad::Tensor& recon, LossKind kind) {
  Matrix r = recon.to_matrix();
  MatchResult match = match_points(source, r);
  const double value = kind == LossKind::augmented ? std::max(match.d_forward, match.d_backward)
                                                   : match.d_forward + match.d_backward;
  return tape.custom({1}, {value},
                     [source, r = std::move(r), match = std::move(match), recon, kind](const ad::Tensor& o) {
                       const double g = o.grad()[0];
                       if (g == 0.0) return;
                       const Matrix d = kind == LossKind::augmented
                                            ? augmented_chamfer_grad(source, r, match)
                                            : chamfer_plain_grad(source, r, match);
                       auto gr = recon.grad();
                       for (std::size_t i = 0; i < d.size(); ++i) gr[i] += g * d.data()[i];
                     });
}

}  // namespace foldgraph
