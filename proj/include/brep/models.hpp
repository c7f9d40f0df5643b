#ifndef BREP_MODELS_HPP
#define BREP_MODELS_HPP

// Classifiers, generators and synthetic data used as desk-scale stand-ins for
// a trained target model, an evaluation model and a public data prior.

#include "brep/core.hpp"

#include <concepts>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace brep {

class TrainingFailed : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// Anything that maps an input vector to a score vector and can pull a
/// cotangent on the scores back to the input.
template <class M>
concept Classifier = requires(const M& m, const Vector& x) {
  { m.logits(x) } -> std::convertible_to<Vector>;
  { m.input_gradient(x, x) } -> std::convertible_to<Vector>;
  { m.input_dim() } -> std::convertible_to<std::size_t>;
  { m.num_classes() } -> std::convertible_to<std::size_t>;
};

/// Index of the largest entry, lowest index on ties.
inline std::size_t argmax_lowest(const Vector& scores) {
  std::size_t best = 0;
  for (Eigen::Index c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(c);
  }
  return best;
}

inline void check_input(std::size_t expected, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != expected) {
    throw DimensionMismatch(expected, static_cast<std::size_t>(x.size()));
  }
}

// logits_c(x) = <w_c, x> + b_c
class LinearSoftmaxClassifier {
 public:
  LinearSoftmaxClassifier(Matrix weights, Vector biases)
      : weights_(std::move(weights)), biases_(std::move(biases)) {
    if (weights_.rows() < 2) throw InvalidArgument("a classifier needs at least two classes");
    if (biases_.size() != weights_.rows()) {
      throw DimensionMismatch(static_cast<std::size_t>(weights_.rows()),
                              static_cast<std::size_t>(biases_.size()));
    }
    if (!weights_.allFinite() || !biases_.allFinite()) {
      throw InvalidArgument("classifier parameters must be finite");
    }
  }

  Vector logits(const Vector& x) const {
    check_input(input_dim(), x);
    return weights_ * x + biases_;
  }

  /// Gradient of <coeff, logits(x)> with respect to x.
  Vector input_gradient(const Vector& x, const Vector& coeff) const {
    check_input(input_dim(), x);
    check_input(num_classes(), coeff);
    return weights_.transpose() * coeff;
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(weights_.cols()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(weights_.rows()); }
  const Matrix& weights() const { return weights_; }
  const Vector& biases() const { return biases_; }

 private:
  Matrix weights_;  // num_classes x input_dim
  Vector biases_;
};

/// Fully connected network with tanh hidden layers and a linear output layer.
class MlpClassifier {
 public:
  struct Layer {
    Matrix weights;  // out x in
    Vector biases;
  };

  explicit MlpClassifier(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw InvalidArgument("an MLP needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.biases.size() != l.weights.rows()) {
        throw DimensionMismatch(static_cast<std::size_t>(l.weights.rows()),
                                static_cast<std::size_t>(l.biases.size()));
      }
      if (i > 0 && l.weights.cols() != layers_[i - 1].weights.rows()) {
        throw DimensionMismatch(static_cast<std::size_t>(layers_[i - 1].weights.rows()),
                                static_cast<std::size_t>(l.weights.cols()));
      }
      if (!l.weights.allFinite() || !l.biases.allFinite()) {
        throw InvalidArgument("classifier parameters must be finite");
      }
    }
    if (layers_.back().weights.rows() < 2) {
      throw InvalidArgument("a classifier needs at least two classes");
    }
  }

  Vector logits(const Vector& x) const {
    check_input(input_dim(), x);
    Vector a = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Vector z = layers_[i].weights * a + layers_[i].biases;
      a = (i + 1 < layers_.size()) ? Vector(z.array().tanh()) : z;
    }
    return a;
  }

  /// Reverse-mode pullback of `coeff` through the network.
  Vector input_gradient(const Vector& x, const Vector& coeff) const {
    check_input(input_dim(), x);
    check_input(num_classes(), coeff);
    std::vector<Vector> activations;
    activations.reserve(layers_.size());
    Vector a = x;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
      a = (layers_[i].weights * a + layers_[i].biases).array().tanh();
      activations.push_back(a);
    }
    Vector g = coeff;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      g = layers_[i].weights.transpose() * g;
      if (i > 0) g = g.array() * (1.0 - activations[i - 1].array().square());
    }
    return g;
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().weights.cols()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(layers_.back().weights.rows()); }
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  std::vector<Layer> layers_;
};

/// Two-class model with logits (scale * (1 - |x - center|^2), 0): class 0 is
/// the unit ball around `center`. Margin is quadratic, its gradient is
/// Lipschitz with constant 2 * scale.
class QuadraticBallClassifier {
 public:
  explicit QuadraticBallClassifier(Vector center, double scale = 1.0)
      : center_(std::move(center)), scale_(scale) {
    vec::require_finite(center_, "center");
    if (center_.size() == 0) throw InvalidArgument("invalid dimension: 0");
    if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw InvalidArgument("scale must be positive");
  }

  Vector logits(const Vector& x) const {
    check_input(input_dim(), x);
    Vector out(2);
    out << scale_ * (1.0 - (x - center_).squaredNorm()), 0.0;
    return out;
  }

  Vector input_gradient(const Vector& x, const Vector& coeff) const {
    check_input(input_dim(), x);
    check_input(2, coeff);
    return coeff[0] * (-2.0 * scale_) * (x - center_);
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(center_.size()); }
  std::size_t num_classes() const { return 2; }
  const Vector& center() const { return center_; }
  double scale() const { return scale_; }

 private:
  Vector center_;
  double scale_;
};

using AnyClassifier = std::variant<LinearSoftmaxClassifier, MlpClassifier, QuadraticBallClassifier>;

inline Vector logits(const AnyClassifier& m, const Vector& x) {
  return std::visit([&](const auto& c) { return c.logits(x); }, m);
}
template <Classifier M>
Vector logits(const M& m, const Vector& x) {
  return m.logits(x);
}

/// Hard label: argmax of the logits, lowest class index on ties.
template <Classifier M>
std::size_t hard_label(const M& m, const Vector& x) {
  return argmax_lowest(m.logits(x));
}
inline std::size_t hard_label(const AnyClassifier& m, const Vector& x) {
  return std::visit([&](const auto& c) { return hard_label(c, x); }, m);
}

inline Vector input_gradient(const AnyClassifier& m, const Vector& x, const Vector& coeff) {
  return std::visit([&](const auto& c) { return c.input_gradient(x, coeff); }, m);
}

inline std::size_t input_dim(const AnyClassifier& m) {
  return std::visit([](const auto& c) { return c.input_dim(); }, m);
}
inline std::size_t num_classes(const AnyClassifier& m) {
  return std::visit([](const auto& c) { return c.num_classes(); }, m);
}

inline std::string kind_name(const AnyClassifier& m) {
  struct V {
    std::string operator()(const LinearSoftmaxClassifier&) const { return "linear"; }
    std::string operator()(const MlpClassifier&) const { return "mlp"; }
    std::string operator()(const QuadraticBallClassifier&) const { return "quadratic"; }
  };
  return std::visit(V{}, m);
}

// ---------------------------------------------------------------------------
// Generators

/// G(z) = matrix * z + offset.
class AffineGenerator {
 public:
  AffineGenerator(Matrix matrix, Vector offset) : matrix_(std::move(matrix)), offset_(std::move(offset)) {
    if (offset_.size() != matrix_.rows()) {
      throw DimensionMismatch(static_cast<std::size_t>(matrix_.rows()),
                              static_cast<std::size_t>(offset_.size()));
    }
    if (matrix_.cols() == 0 || matrix_.cols() > matrix_.rows()) {
      throw InvalidArgument("latent dimension must be in [1, output dimension]");
    }
    if (!matrix_.allFinite() || !offset_.allFinite()) {
      throw InvalidArgument("generator parameters must be finite");
    }
  }

  Vector operator()(const Vector& z) const {
    check_input(latent_dim(), z);
    return matrix_ * z + offset_;
  }

  /// J^T g, with J the (constant) Jacobian.
  Vector pullback(const Vector& z, const Vector& g) const {
    check_input(latent_dim(), z);
    check_input(output_dim(), g);
    return matrix_.transpose() * g;
  }

  /// Least-squares latent code of x.
  Vector encode(const Vector& x) const {
    check_input(output_dim(), x);
    return matrix_.colPivHouseholderQr().solve(x - offset_);
  }

  std::size_t latent_dim() const { return static_cast<std::size_t>(matrix_.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  const Matrix& matrix() const { return matrix_; }
  const Vector& offset() const { return offset_; }

 private:
  Matrix matrix_;
  Vector offset_;
};

class IdentityGenerator {
 public:
  explicit IdentityGenerator(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw InvalidArgument("invalid dimension: 0");
  }
  Vector operator()(const Vector& z) const {
    check_input(dim_, z);
    return z;
  }
  Vector pullback(const Vector& z, const Vector& g) const {
    check_input(dim_, z);
    check_input(dim_, g);
    return g;
  }
  Vector encode(const Vector& x) const {
    check_input(dim_, x);
    return x;
  }
  std::size_t latent_dim() const { return dim_; }
  std::size_t output_dim() const { return dim_; }

 private:
  std::size_t dim_;
};

template <class G>
concept Generator = requires(const G& g, const Vector& z) {
  { g(z) } -> std::convertible_to<Vector>;
  { g.pullback(z, z) } -> std::convertible_to<Vector>;
  { g.latent_dim() } -> std::convertible_to<std::size_t>;
  { g.output_dim() } -> std::convertible_to<std::size_t>;
};

class AnyGenerator {
 public:
  AnyGenerator(AffineGenerator g) : impl_(std::move(g)) {}
  AnyGenerator(IdentityGenerator g) : impl_(std::move(g)) {}

  Vector operator()(const Vector& z) const {
    return std::visit([&](const auto& g) { return g(z); }, impl_);
  }
  Vector pullback(const Vector& z, const Vector& grad) const {
    return std::visit([&](const auto& g) { return g.pullback(z, grad); }, impl_);
  }
  Vector encode(const Vector& x) const {
    return std::visit([&](const auto& g) { return g.encode(x); }, impl_);
  }
  std::size_t latent_dim() const {
    return std::visit([](const auto& g) { return g.latent_dim(); }, impl_);
  }
  std::size_t output_dim() const {
    return std::visit([](const auto& g) { return g.output_dim(); }, impl_);
  }
  const std::variant<AffineGenerator, IdentityGenerator>& variant() const { return impl_; }

 private:
  std::variant<AffineGenerator, IdentityGenerator> impl_;
};

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticDataset {
  std::vector<Vector> class_means;
  double spread = 0.0;
  Matrix samples;                  // one row per sample
  std::vector<std::size_t> labels;
  std::vector<std::size_t> public_classes;
  std::vector<std::size_t> private_classes;

  std::size_t num_classes() const { return class_means.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(samples.cols()); }
  std::size_t size() const { return labels.size(); }

  /// Rows whose label is in `classes`, in dataset order.
  Matrix rows_of(const std::vector<std::size_t>& classes) const {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (std::find(classes.begin(), classes.end(), labels[i]) != classes.end()) {
        idx.push_back(static_cast<Eigen::Index>(i));
      }
    }
    Matrix out(static_cast<Eigen::Index>(idx.size()), samples.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = samples.row(idx[r]);
    return out;
  }
};

/// Class means uniform on the sphere of radius `separation`; samples are
/// mean + spread * N(0, I). The first round(num_classes * public_fraction)
/// classes are public, the rest private.
inline SyntheticDataset make_gaussian_mixture(std::size_t num_classes, std::size_t dim,
                                              double separation, double spread,
                                              std::size_t samples_per_class,
                                              double public_fraction, RngStream& rng) {
  if (num_classes < 2) throw InvalidArgument("need at least two classes");
  if (dim == 0) throw InvalidArgument("invalid dimension: 0");
  if (!(separation > 0.0)) throw InvalidArgument("separation must be positive");
  if (!(spread >= 0.0) || !std::isfinite(spread)) throw InvalidArgument("spread must be non-negative");
  if (samples_per_class == 0) throw InvalidArgument("samples_per_class must be positive");
  if (!(public_fraction >= 0.0 && public_fraction <= 1.0)) {
    throw InvalidArgument("public fraction must lie in [0, 1]");
  }

  SyntheticDataset ds;
  ds.spread = spread;
  for (std::size_t c = 0; c < num_classes; ++c) {
    ds.class_means.push_back(separation * sample_unit_sphere(dim, rng).vector());
  }
  ds.samples.resize(static_cast<Eigen::Index>(num_classes * samples_per_class),
                    static_cast<Eigen::Index>(dim));
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t s = 0; s < samples_per_class; ++s, ++row) {
      ds.samples.row(row) = (ds.class_means[c] + spread * rng.normal_vector(dim)).transpose();
      ds.labels.push_back(c);
    }
  }
  const auto n_public = static_cast<std::size_t>(std::lround(public_fraction * static_cast<double>(num_classes)));
  for (std::size_t c = 0; c < num_classes; ++c) {
    (c < n_public ? ds.public_classes : ds.private_classes).push_back(c);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Training

struct ArchitectureSpec {
  enum class Kind { Linear, Mlp };
  Kind kind = Kind::Linear;
  std::vector<std::size_t> hidden;  // MLP hidden widths
  double learning_rate = 0.5;
  double momentum = 0.9;
  double l2 = 1e-4;
  std::size_t min_epochs = 200;
  std::size_t max_epochs = 5000;
  double target_accuracy = 0.99;
  double min_accuracy = 0.90;

  static ArchitectureSpec linear() { return {}; }
  static ArchitectureSpec mlp(std::vector<std::size_t> hidden_widths) {
    ArchitectureSpec a;
    a.kind = Kind::Mlp;
    a.hidden = std::move(hidden_widths);
    a.learning_rate = 0.2;
    return a;
  }
  std::string name() const { return kind == Kind::Linear ? "linear" : "mlp"; }
};

/// A classifier over a subset of dataset classes: output index i stands for
/// dataset class class_ids[i].
struct TrainedClassifier {
  AnyClassifier model;
  std::vector<std::size_t> class_ids;
  double train_accuracy = 0.0;
  std::size_t epochs = 0;

  std::optional<std::size_t> index_of(std::size_t class_id) const {
    for (std::size_t i = 0; i < class_ids.size(); ++i) {
      if (class_ids[i] == class_id) return i;
    }
    return std::nullopt;
  }
};

namespace detail {

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double m = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

inline double accuracy_of(const Matrix& logits, const std::vector<std::size_t>& y) {
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (argmax_lowest(logits.row(r).transpose()) == y[static_cast<std::size_t>(r)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

// Layer stack trained on standardized inputs; standardization is folded into
// the first layer afterwards so the exported model acts on raw inputs.
struct DenseStack {
  std::vector<Matrix> W;
  std::vector<Vector> b;

  Matrix forward(const Matrix& X, std::vector<Matrix>* acts) const {
    Matrix a = X;
    if (acts) acts->assign(1, a);
    for (std::size_t i = 0; i < W.size(); ++i) {
      Matrix z = (a * W[i].transpose()).rowwise() + b[i].transpose();
      a = (i + 1 < W.size()) ? Matrix(z.array().tanh()) : z;
      if (acts) acts->push_back(a);
    }
    return a;
  }
};

}  // namespace detail

/// Fits a linear softmax model or a tanh MLP to the samples of `classes` by
/// full-batch gradient descent (heavy-ball momentum) on mean cross-entropy.
/// Stops once training accuracy reaches spec.target_accuracy after
/// spec.min_epochs, or at spec.max_epochs.
inline TrainedClassifier train_classifier(const SyntheticDataset& ds,
                                          const std::vector<std::size_t>& classes,
                                          const ArchitectureSpec& spec, RngStream& rng) {
  if (classes.size() < 2) throw InvalidArgument("training needs at least two classes");
  for (std::size_t c : classes) {
    if (c >= ds.num_classes()) throw InvalidArgument("unknown class " + std::to_string(c));
    const auto count = std::count(ds.labels.begin(), ds.labels.end(), c);
    if (count < 2) throw InvalidArgument("class " + std::to_string(c) + " has fewer than 2 samples");
  }

  const Matrix X_raw = ds.rows_of(classes);
  std::vector<std::size_t> y;
  for (std::size_t lbl : ds.labels) {
    auto it = std::find(classes.begin(), classes.end(), lbl);
    if (it != classes.end()) y.push_back(static_cast<std::size_t>(it - classes.begin()));
  }
  const auto n = X_raw.rows();
  const auto d = X_raw.cols();
  const auto k = static_cast<Eigen::Index>(classes.size());

  const Vector mu = X_raw.colwise().mean().transpose();
  Vector sd = ((X_raw.rowwise() - mu.transpose()).array().square().colwise().sum() /
               static_cast<double>(n)).sqrt().transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(sd[j] > 1e-12)) sd[j] = 1.0;
  }
  const Matrix X = (X_raw.rowwise() - mu.transpose()).array().rowwise() / sd.transpose().array();
  Matrix Y = Matrix::Zero(n, k);
  for (Eigen::Index r = 0; r < n; ++r) Y(r, static_cast<Eigen::Index>(y[static_cast<std::size_t>(r)])) = 1.0;

  detail::DenseStack net;
  std::vector<Eigen::Index> widths{d};
  if (spec.kind == ArchitectureSpec::Kind::Mlp) {
    if (spec.hidden.empty()) throw InvalidArgument("an MLP needs at least one hidden layer");
    for (auto h : spec.hidden) {
      if (h == 0) throw InvalidArgument("hidden width must be positive");
      widths.push_back(static_cast<Eigen::Index>(h));
    }
  }
  widths.push_back(k);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const double limit = std::sqrt(6.0 / static_cast<double>(widths[i] + widths[i + 1]));
    Matrix W(widths[i + 1], widths[i]);
    if (spec.kind == ArchitectureSpec::Kind::Linear) {
      W.setZero();
    } else {
      for (Eigen::Index r = 0; r < W.rows(); ++r)
        for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = limit * (2.0 * rng.uniform() - 1.0);
    }
    net.W.push_back(W);
    net.b.push_back(Vector::Zero(widths[i + 1]));
  }

  std::vector<Matrix> vW;
  std::vector<Vector> vb;
  for (std::size_t i = 0; i < net.W.size(); ++i) {
    vW.push_back(Matrix::Zero(net.W[i].rows(), net.W[i].cols()));
    vb.push_back(Vector::Zero(net.b[i].size()));
  }

  double acc = 0.0;
  std::size_t epoch = 0;
  std::vector<Matrix> acts;
  for (; epoch < spec.max_epochs; ++epoch) {
    const Matrix out = net.forward(X, &acts);
    acc = detail::accuracy_of(out, y);
    if (epoch >= spec.min_epochs && acc >= spec.target_accuracy) break;
    Matrix delta = (detail::softmax_rows(out) - Y) / static_cast<double>(n);
    for (std::size_t i = net.W.size(); i-- > 0;) {
      Matrix gW = delta.transpose() * acts[i] + spec.l2 * net.W[i];
      Vector gb = delta.colwise().sum().transpose();
      if (i > 0) {
        delta = (delta * net.W[i]).array() * (1.0 - acts[i].array().square());
      }
      vW[i] = spec.momentum * vW[i] - spec.learning_rate * gW;
      vb[i] = spec.momentum * vb[i] - spec.learning_rate * gb;
      net.W[i] += vW[i];
      net.b[i] += vb[i];
    }
  }
  if (epoch == spec.max_epochs) acc = detail::accuracy_of(net.forward(X, nullptr), y);
  if (acc < spec.min_accuracy) {
    throw TrainingFailed("training stopped at accuracy " + std::to_string(acc) + " after " +
                         std::to_string(epoch) + " epochs");
  }

  // Fold x_std = (x - mu) / sd into the first layer.
  const Matrix W0 = net.W[0] * sd.cwiseInverse().asDiagonal();
  const Vector b0 = net.b[0] - W0 * mu;

  TrainedClassifier out{LinearSoftmaxClassifier(Matrix::Zero(2, 1), Vector::Zero(2)), classes, acc, epoch};
  if (spec.kind == ArchitectureSpec::Kind::Linear) {
    out.model = LinearSoftmaxClassifier(W0, b0);
  } else {
    std::vector<MlpClassifier::Layer> layers;
    layers.push_back({W0, b0});
    for (std::size_t i = 1; i < net.W.size(); ++i) layers.push_back({net.W[i], net.b[i]});
    out.model = MlpClassifier(std::move(layers));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Public prior

/// Principal-component decoder: offset = sample mean, column i = i-th
/// principal direction scaled by the standard deviation along it (the
/// singular value of the centered data divided by sqrt(n)). Latent N(0, I)
/// therefore maps onto the data's dominant covariance ellipsoid.
inline AffineGenerator fit_affine_generator(const Matrix& samples, std::size_t latent_dim) {
  const auto n = samples.rows();
  const auto d = samples.cols();
  if (latent_dim == 0) throw InvalidArgument("latent dimension must be positive");
  if (static_cast<Eigen::Index>(latent_dim) > d) {
    throw InvalidArgument("latent dimension exceeds data dimension");
  }
  if (n <= static_cast<Eigen::Index>(latent_dim)) {
    throw InvalidArgument("need more samples than latent dimensions");
  }
  if (!samples.allFinite()) throw InvalidArgument("samples contain a non-finite value");

  const Vector mean = samples.colwise().mean().transpose();
  const Matrix centered = (samples.rowwise() - mean.transpose()) / std::sqrt(static_cast<double>(n));
  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double tol = std::max(sv[0], 1e-300) * 1e-10 * static_cast<double>(std::max(n, d));
  const auto k = static_cast<Eigen::Index>(latent_dim);
  if (!(sv[k - 1] > tol)) {
    throw RankDeficient("centered data has rank below " + std::to_string(latent_dim));
  }
  Matrix basis = svd.matrixV().leftCols(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index i_max = 0;
    basis.col(c).cwiseAbs().maxCoeff(&i_max);
    if (basis(i_max, c) < 0.0) basis.col(c) *= -1.0;
  }
  return AffineGenerator(basis * sv.head(k).asDiagonal(), mean);
}

}  // namespace brep

#endif  // BREP_MODELS_HPP
