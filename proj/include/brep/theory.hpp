#ifndef BREP_THEORY_HPP
#define BREP_THEORY_HPP

// Closed-form margins and gradients, and Monte-Carlo alignment curves that
// compare the hard-label direction estimate against the true margin gradient.

#include "brep/attack.hpp"
#include "brep/models.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace brep {

struct MarginGradient {
  Vector gradient;
  std::size_t runner_up = 0;
  // Another class is within 1e-12 of the runner-up logit; the margin is not
  // differentiable there and `gradient` uses the lowest runner-up index.
  bool tie = false;
};

/// M(x) = f_target(x) - max_{c != target} f_c(x).
class MarginModel {
 public:
  MarginModel(AnyClassifier model, std::size_t target) : model_(std::move(model)), target_(target) {
    if (target_ >= num_classes(model_)) throw InvalidArgument("target class out of range");
  }

  const AnyClassifier& model() const { return model_; }
  std::size_t target() const { return target_; }
  std::size_t input_dim() const { return brep::input_dim(model_); }

  double margin(const Vector& x) const {
    const Vector f = logits(model_, x);
    return f[idx(target_)] - f[idx(runner_up(f))];
  }

  MarginGradient gradient(const Vector& x) const {
    const Vector f = logits(model_, x);
    MarginGradient out;
    out.runner_up = runner_up(f);
    for (Eigen::Index c = 0; c < f.size(); ++c) {
      if (c == idx(target_) || c == idx(out.runner_up)) continue;
      if (std::abs(f[c] - f[idx(out.runner_up)]) <= 1e-12) out.tie = true;
    }
    Vector coeff = Vector::Zero(f.size());
    coeff[idx(target_)] = 1.0;
    coeff[idx(out.runner_up)] = -1.0;
    out.gradient = input_gradient(model_, x, coeff);
    return out;
  }

  /// Margin of G(z) and its latent gradient J_G(z)^T grad M(G(z)).
  template <Generator G>
  double latent_margin(const G& generator, const Vector& z) const {
    return margin(generator(z));
  }
  template <Generator G>
  MarginGradient latent_gradient(const G& generator, const Vector& z) const {
    MarginGradient g = gradient(generator(z));
    g.gradient = generator.pullback(z, g.gradient);
    return g;
  }

 private:
  static Eigen::Index idx(std::size_t c) { return static_cast<Eigen::Index>(c); }
  std::size_t runner_up(const Vector& f) const {
    std::size_t best = target_ == 0 ? 1 : 0;
    for (std::size_t c = 0; c < static_cast<std::size_t>(f.size()); ++c) {
      if (c != target_ && f[idx(c)] > f[idx(best)]) best = c;
    }
    return best;
  }

  AnyClassifier model_;
  std::size_t target_;
};

inline double margin(const MarginModel& m, const Vector& x) { return m.margin(x); }
inline MarginGradient margin_gradient(const MarginModel& m, const Vector& x) { return m.gradient(x); }

/// Lower bound on cos(E[estimate], grad M) for a linear model at effective
/// radius rho: 1 - 2 M^2 (d-1)^2 / (rho^2 |grad M|^2), clamped to >= -1.
inline double alignment_bound(double margin_value, double grad_norm, std::size_t dim, double rho) {
  if (!(margin_value > 0.0) || !(grad_norm > 0.0) || dim == 0 || !(rho > 0.0)) {
    throw InvalidArgument("bound arguments must be positive");
  }
  const double dm1 = static_cast<double>(dim) - 1.0;
  const double b = 1.0 - 2.0 * margin_value * margin_value * dm1 * dm1 / (rho * rho * grad_norm * grad_norm);
  return std::max(b, -1.0);
}

struct AlignmentPoint {
  double radius = 0.0;
  // Cosine between the trial-averaged estimate (Monte-Carlo E[estimate]) and
  // the true gradient; 0 when every sample stayed inside.
  double mean_cos = 0.0;
  double stderr_cos = 0.0;  // delete-one jackknife over trials
  std::size_t trials = 0;
  double bound = -1.0;
  double per_batch_cos = 0.0;   // mean over trials of single-batch cosines
  double per_batch_stderr = 0.0;
  double outside_fraction = 0.0;
};

struct AlignmentCurve {
  std::string model_kind;
  Vector base_point;
  std::size_t samples_per_trial = 0;
  double base_margin = 0.0;
  double gradient_norm = 0.0;
  std::vector<AlignmentPoint> points;

  /// Index of the radius with the largest mean cosine (first on ties).
  std::size_t argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (points[i].mean_cos > points[best].mean_cos) best = i;
    }
    return best;
  }
};

namespace detail {
inline double safe_cos(const Vector& a, const Vector& b) {
  return a.squaredNorm() == 0.0 ? 0.0 : vec::cosine(a, b);
}
}  // namespace detail

/// For each radius, `trials` independent batches of N sphere queries against
/// the model's own hard labels, each cell on its own sub-seeded stream.
template <Generator G>
AlignmentCurve alignment_sweep(const MarginModel& model, const G& generator, const Vector& z,
                               const std::vector<double>& radii, std::size_t n, std::size_t trials,
                               RngStream& rng) {
  if (radii.empty()) throw InvalidArgument("radius list is empty");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw InvalidArgument("radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw InvalidArgument("radii must be ascending");
  }
  if (trials < 30) throw InvalidArgument("at least 30 trials per radius are required");
  if (n == 0) throw InvalidArgument("N must be at least 1");
  const double m0 = model.latent_margin(generator, z);
  if (!(m0 > 0.0)) throw InvalidArgument("base point must lie inside the target class");
  const Vector grad = model.latent_gradient(generator, z).gradient;
  if (grad.squaredNorm() == 0.0) throw NumericalError("undefined alignment: zero gradient at base point");

  AlignmentCurve curve;
  curve.model_kind = kind_name(model.model());
  curve.base_point = z;
  curve.samples_per_trial = n;
  curve.base_margin = m0;
  curve.gradient_norm = grad.norm();

  ModelOracle oracle(model.model());
  const RngStream base(rng.next_u64());
  const auto t_count = static_cast<double>(trials);
  for (std::size_t i = 0; i < radii.size(); ++i) {
    std::vector<Vector> estimates;
    estimates.reserve(trials);
    Vector sum = Vector::Zero(grad.size());
    std::vector<double> batch_cos;
    double outside = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      RngStream cell = base.split(i * trials + t);
      DirectionEstimate est =
          estimate_direction(oracle, generator, model.target(), z, radii[i], n, cell);
      batch_cos.push_back(detail::safe_cos(est.vector, grad));
      outside += est.outside_fraction;
      sum += est.vector;
      estimates.push_back(std::move(est.vector));
    }
    AlignmentPoint p;
    p.radius = radii[i];
    p.trials = trials;
    p.mean_cos = detail::safe_cos(sum / t_count, grad);
    p.per_batch_cos = std::accumulate(batch_cos.begin(), batch_cos.end(), 0.0) / t_count;
    double bss = 0.0;
    for (double c : batch_cos) bss += (c - p.per_batch_cos) * (c - p.per_batch_cos);
    p.per_batch_stderr = std::sqrt(bss / (t_count - 1.0) / t_count);
    p.outside_fraction = outside / t_count;
    p.bound = alignment_bound(m0, curve.gradient_norm, generator.latent_dim(), radii[i]);

    std::vector<double> loo(trials);
    double loo_mean = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      loo[t] = detail::safe_cos((sum - estimates[t]) / (t_count - 1.0), grad);
      loo_mean += loo[t];
    }
    loo_mean /= t_count;
    double ss = 0.0;
    for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
    p.stderr_cos = std::sqrt((t_count - 1.0) / t_count * ss);
    curve.points.push_back(p);
  }
  return curve;
}

/// CSV: rho,mean_cos,stderr,trials,bound,per_batch_cos,per_batch_stderr
inline void write_alignment_csv(std::ostream& os, const AlignmentCurve& curve) {
  os << "rho,mean_cos,stderr,trials,bound,per_batch_cos,per_batch_stderr\n";
  char buf[256];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%zu,%.17g,%.17g,%.17g\n", p.radius, p.mean_cos,
                  p.stderr_cos, p.trials, p.bound, p.per_batch_cos, p.per_batch_stderr);
    os << buf;
  }
}

}  // namespace brep

#endif  // BREP_THEORY_HPP
