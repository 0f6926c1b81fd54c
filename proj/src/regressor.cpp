#include "reorient/regressor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "reorient/error.hpp"

namespace reorient {

RegressorModel::RegressorModel(RegressorShape shape)
    : shape_(shape), layers_(layout(shape)), params_(Eigen::VectorXd::Zero(
                                                 static_cast<Eigen::Index>(layers_[3].offset + layers_[3].size()))) {}

std::array<LayerSpec, 4> RegressorModel::layout(const RegressorShape& s) {
  if (s.input_side < 1 || s.embed < 1 || s.hidden < 1) {
    throw ShapeMismatch("layer sizes must be positive");
  }
  std::array<LayerSpec, 4> l{{{s.embed, s.input_side * s.input_side, 0},
                              {s.hidden, 2 * s.embed, 0},
                              {s.hidden, s.hidden, 0},
                              {4, s.hidden, 0}}};
  std::size_t offset = 0;
  for (auto& spec : l) {
    spec.offset = offset;
    offset += spec.size();
  }
  return l;
}

RegressorModel RegressorModel::initialized(RegressorShape shape, Rng& rng) {
  RegressorModel model(shape);
  for (const auto& spec : model.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t n = 0; n < spec.weight_count(); ++n) {
      model.params_[static_cast<Eigen::Index>(spec.offset + n)] = dist(rng);
    }
  }
  return model;
}

Eigen::Map<const Eigen::MatrixXd> RegressorModel::weight(Layer l) const {
  const auto& s = layers_[l];
  return {params_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::VectorXd> RegressorModel::bias(Layer l) const {
  const auto& s = layers_[l];
  return {params_.data() + s.offset + s.weight_count(), s.rows};
}

Eigen::VectorXd prepare_input(const DepthImage& img, int side) {
  if (img.width != img.height || side < 1 || img.width % side != 0) {
    throw ShapeMismatch("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " cannot be pooled to " + std::to_string(side) + "x" + std::to_string(side));
  }
  const int f = img.width / side;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(side) * side);
  const double norm = 1.0 / (65535.0 * f * f);
  for (int row = 0; row < img.height; ++row) {
    for (int col = 0; col < img.width; ++col) {
      out[(row / f) * side + col / f] += img.at(row, col) * norm;
    }
  }
  return out;
}

namespace {

Eigen::VectorXd leaky(const Eigen::VectorXd& x, double slope) {
  return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Eigen::VectorXd leaky_grad(const Eigen::VectorXd& pre, double slope) {
  return pre.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

Eigen::VectorXd dropout_mask(Eigen::Index n, double rate, Mode mode, Rng& rng) {
  if (mode == Mode::Eval || rate <= 0.0) return Eigen::VectorXd::Ones(n);
  Eigen::VectorXd mask(n);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < n; ++i) mask[i] = keep(rng) ? scale : 0.0;
  return mask;
}

}  // namespace

ForwardResult regressor_forward(const RegressorModel& model, const Eigen::VectorXd& input_s,
                                const Eigen::VectorXd& input_g, Mode mode, Rng& rng) {
  const auto& shape = model.shape();
  const Eigen::Index n_in = static_cast<Eigen::Index>(shape.input_side) * shape.input_side;
  if (input_s.size() != n_in || input_g.size() != n_in) {
    throw ShapeMismatch("input size does not match the model");
  }
  const double slope = model.leaky_slope;
  ForwardResult res;
  auto& c = res.cache;
  c.input_s = input_s;
  c.input_g = input_g;
  c.pre_s = model.weight(kEncoder) * input_s + model.bias(kEncoder);
  c.pre_g = model.weight(kEncoder) * input_g + model.bias(kEncoder);
  c.joint.resize(2 * shape.embed);
  c.joint << leaky(c.pre_s, slope), leaky(c.pre_g, slope);

  c.pre1 = model.weight(kHidden1) * c.joint + model.bias(kHidden1);
  c.mask1 = dropout_mask(c.pre1.size(), model.dropout, mode, rng);
  c.out1 = leaky(c.pre1, slope).cwiseProduct(c.mask1);

  c.pre2 = model.weight(kHidden2) * c.out1 + model.bias(kHidden2);
  c.mask2 = dropout_mask(c.pre2.size(), model.dropout, mode, rng);
  c.out2 = leaky(c.pre2, slope).cwiseProduct(c.mask2);

  c.raw = model.weight(kOutput) * c.out2 + model.bias(kOutput);
  c.raw_norm = c.raw.norm();
  if (!(c.raw_norm >= 1e-12)) {
    c.fallback = true;
    res.estimate.fallback = true;
    res.estimate.q_hat = UnitQuaternion::identity();
    return res;
  }
  const UnitQuaternion u = UnitQuaternion::normalize(c.raw);
  c.sign = u.r() < 0.0 ? -1.0 : 1.0;
  res.estimate.q_hat = canonicalize(u);
  return res;
}

Eigen::Vector4d normalization_vjp(const Eigen::Vector4d& raw, const Eigen::Vector4d& v) {
  const double n = raw.norm();
  const Eigen::Vector4d u = raw / n;
  return (v - u * u.dot(v)) / n;
}

Eigen::VectorXd regressor_backward(const RegressorModel& model, const ForwardCache& c,
                                   const Eigen::Vector4d& loss_gradient, double l2) {
  Eigen::VectorXd grad = 2.0 * l2 * model.parameters();
  if (c.fallback) return grad;
  const double slope = model.leaky_slope;
  const auto& L = model.layers();
  auto gw = [&](Layer l) {
    return Eigen::Map<Eigen::MatrixXd>(grad.data() + L[l].offset, L[l].rows, L[l].cols);
  };
  auto gb = [&](Layer l) {
    return Eigen::Map<Eigen::VectorXd>(grad.data() + L[l].offset + L[l].weight_count(), L[l].rows);
  };

  const Eigen::Vector4d g_raw = normalization_vjp(c.raw, c.sign * loss_gradient);
  gw(kOutput).noalias() += g_raw * c.out2.transpose();
  gb(kOutput) += g_raw;

  const Eigen::VectorXd g_pre2 = (model.weight(kOutput).transpose() * g_raw)
                                     .cwiseProduct(c.mask2)
                                     .cwiseProduct(leaky_grad(c.pre2, slope));
  gw(kHidden2).noalias() += g_pre2 * c.out1.transpose();
  gb(kHidden2) += g_pre2;

  const Eigen::VectorXd g_pre1 = (model.weight(kHidden2).transpose() * g_pre2)
                                     .cwiseProduct(c.mask1)
                                     .cwiseProduct(leaky_grad(c.pre1, slope));
  gw(kHidden1).noalias() += g_pre1 * c.joint.transpose();
  gb(kHidden1) += g_pre1;

  const Eigen::VectorXd g_joint = model.weight(kHidden1).transpose() * g_pre1;
  const Eigen::Index e = model.shape().embed;
  const Eigen::VectorXd g_pre_s = g_joint.head(e).cwiseProduct(leaky_grad(c.pre_s, slope));
  const Eigen::VectorXd g_pre_g = g_joint.tail(e).cwiseProduct(leaky_grad(c.pre_g, slope));
  gw(kEncoder).noalias() += g_pre_s * c.input_s.transpose();
  gw(kEncoder).noalias() += g_pre_g * c.input_g.transpose();
  gb(kEncoder) += g_pre_s + g_pre_g;
  return grad;
}

double learning_rate_at(const AdamConfig& cfg, int epoch) {
  return cfg.learning_rate * std::pow(cfg.decay, epoch / cfg.decay_every);
}

void adam_step(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& gradient,
               const AdamConfig& cfg, int epoch) {
  if (gradient.size() != params.size()) throw ShapeMismatch("gradient size differs from parameters");
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * gradient;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double lr = learning_rate_at(cfg, epoch);
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.epsilon);
}

namespace {

constexpr char kMagic[8] = {'R', 'E', 'O', 'R', 'I', 'E', 'N', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}
void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}
void put_f64(std::vector<unsigned char>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(std::vector<unsigned char> buf, std::string name) : buf_(std::move(buf)), name_(std::move(name)) {}

  std::uint64_t take(int bytes) {
    if (pos_ + static_cast<std::size_t>(bytes) > buf_.size()) {
      throw IoError(name_ + " is truncated");
    }
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * b);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  double f64() { return std::bit_cast<double>(take(8)); }
  bool at_end() const { return pos_ == buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }
  const std::vector<unsigned char>& bytes() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const RegressorModel& model, const std::filesystem::path& path) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(model.shape().input_side));
  put_u32(out, static_cast<std::uint32_t>(model.shape().embed));
  put_u32(out, static_cast<std::uint32_t>(model.shape().hidden));
  put_f64(out, model.leaky_slope);
  put_f64(out, model.dropout);
  put_u32(out, static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    put_u32(out, static_cast<std::uint32_t>(l.rows));
    put_u32(out, static_cast<std::uint32_t>(l.cols));
  }
  put_u64(out, static_cast<std::uint64_t>(model.parameters().size()));
  for (Eigen::Index n = 0; n < model.parameters().size(); ++n) put_f64(out, model.parameters()[n]);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

RegressorModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  Reader in({std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()}, path.string());
  for (char m : kMagic) {
    if (static_cast<char>(in.take(1)) != m) throw IoError(path.string() + " is not a model file");
  }
  if (in.u32() != kVersion) throw IoError(path.string() + " has an unsupported version");
  RegressorShape shape;
  shape.input_side = static_cast<int>(in.u32());
  shape.embed = static_cast<int>(in.u32());
  shape.hidden = static_cast<int>(in.u32());
  const double slope = in.f64();
  const double dropout = in.f64();
  const std::uint32_t n_layers = in.u32();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> table(n_layers);
  for (auto& [r, c] : table) {
    r = in.u32();
    c = in.u32();
  }
  const std::uint64_t n_params = in.u64();
  if (n_params > in.remaining() / 8) throw IoError(path.string() + " is truncated");

  RegressorModel model(shape);
  if (n_layers != model.layers().size()) throw ShapeMismatch("unexpected layer count");
  for (std::size_t l = 0; l < table.size(); ++l) {
    if (static_cast<int>(table[l].first) != model.layers()[l].rows ||
        static_cast<int>(table[l].second) != model.layers()[l].cols) {
      throw ShapeMismatch("layer " + std::to_string(l) + " shape disagrees with the header");
    }
  }
  if (n_params != static_cast<std::uint64_t>(model.parameters().size())) {
    throw ShapeMismatch("parameter count disagrees with the layer table");
  }
  for (Eigen::Index n = 0; n < model.parameters().size(); ++n) model.parameters()[n] = in.f64();
  if (!in.at_end()) throw IoError(path.string() + " has trailing bytes");
  model.leaky_slope = slope;
  model.dropout = dropout;
  return model;
}

RegressorModel load_model(const std::filesystem::path& path, const RegressorShape& expected) {
  RegressorModel model = load_model(path);
  if (!(model.shape() == expected)) throw ShapeMismatch("stored model shape differs from the expected one");
  return model;
}

RotationEstimate RegressorEstimator::estimate(const DepthImage& current, const DepthImage& goal) {
  const int side = model_.shape().input_side;
  return regressor_forward(model_, prepare_input(current, side), prepare_input(goal, side), Mode::Eval,
                           unused_rng_)
      .estimate;
}

}  // namespace reorient
