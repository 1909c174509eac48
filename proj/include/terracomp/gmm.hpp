#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "terracomp/features.hpp"
#include "terracomp/kmeans.hpp"

namespace terracomp {

struct GmmModel {
  int k = 0;
  std::size_t n_dims = 0;
  std::vector<double> weights;      // k, sum to 1
  std::vector<double> means;        // k x d
  std::vector<double> covariances;  // k x d x d, row-major per component
  std::vector<double> log_likelihood_trace;  // mean log-likelihood per sample
  int iterations = 0;

  std::span<const double> mean(int c) const {
    return {means.data() + static_cast<std::size_t>(c) * n_dims, n_dims};
  }
  std::span<const double> covariance(int c) const {
    return {covariances.data() + static_cast<std::size_t>(c) * n_dims * n_dims,
            n_dims * n_dims};
  }
};

struct GmmResult {
  GmmModel model;
  std::vector<int> labels;  // argmax responsibility
};

namespace detail {

// Lower-triangular Cholesky factor of a symmetric matrix; false if the
// matrix is not positive-definite.
inline bool cholesky(const double* a, std::size_t d, double* L) {
  for (std::size_t i = 0; i < d * d; ++i) L[i] = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * d + j];
      for (std::size_t p = 0; p < j; ++p) s -= L[i * d + p] * L[j * d + p];
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) return false;
        L[i * d + i] = std::sqrt(s);
      } else {
        L[i * d + j] = s / L[j * d + j];
      }
    }
  }
  return true;
}

// Gaussian evaluation state for one component: Cholesky factor and the
// constant part of the log-density.
struct GaussianEval {
  std::vector<double> L;
  double log_norm = 0.0;  // -(d log 2pi + log|Sigma|) / 2

  bool init(const double* cov, std::size_t d) {
    L.resize(d * d);
    if (!cholesky(cov, d, L.data())) return false;
    double log_det = 0.0;
    for (std::size_t i = 0; i < d; ++i) log_det += std::log(L[i * d + i]);
    log_det *= 2.0;
    log_norm = -0.5 * (static_cast<double>(d) * 1.8378770664093454836 + log_det);
    return true;
  }

  // log N(x; mu, Sigma) using forward substitution on L y = (x - mu)
  double log_density(std::span<const double> x, std::span<const double> mu,
                     std::vector<double>& scratch) const {
    const std::size_t d = mu.size();
    scratch.resize(d);
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double s = x[i] - mu[i];
      for (std::size_t p = 0; p < i; ++p) s -= L[i * d + p] * scratch[p];
      scratch[i] = s / L[i * d + i];
      quad += scratch[i] * scratch[i];
    }
    return log_norm - 0.5 * quad;
  }
};

}  // namespace detail

/// Mean per-dimension sample variance; the pipeline's default covariance
/// regularizer is 1e-6 times this.
inline double mean_feature_variance(const FeatureMatrix& f) {
  double total = 0.0;
  for (std::size_t d = 0; d < f.n_dims; ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < f.n_samples; ++i)
      mean += f.values[i * f.n_dims + d];
    mean /= static_cast<double>(f.n_samples);
    double var = 0.0;
    for (std::size_t i = 0; i < f.n_samples; ++i) {
      const double dv = f.values[i * f.n_dims + d] - mean;
      var += dv * dv;
    }
    total += var / static_cast<double>(f.n_samples);
  }
  return total / static_cast<double>(f.n_dims);
}

inline double default_cov_reg(const FeatureMatrix& f) {
  const double v = 1e-6 * mean_feature_variance(f);
  return v > 0.0 ? v : 1e-6;
}

/// Expectation-maximization with full covariances, initialized from
/// distance-squared-seeded k-means. The M-step adds cov_reg to every
/// covariance diagonal; iteration stops when the mean log-likelihood gain
/// drops below tol.
inline GmmResult gmm_fit(const FeatureMatrix& f, int k, std::uint64_t seed,
                         int max_iter = 200, double tol = 1e-7,
                         double cov_reg = 0.0) {
  f.validate();
  const std::size_t n = f.n_samples, d = f.n_dims;
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("gmm_fit: k must be in [1, n_samples]");
  if (cov_reg <= 0.0) cov_reg = default_cov_reg(f);

  GmmResult res;
  auto& model = res.model;
  model.k = k;
  model.n_dims = d;
  model.weights.assign(static_cast<std::size_t>(k), 1.0 / k);
  model.means.resize(static_cast<std::size_t>(k) * d);
  model.covariances.assign(static_cast<std::size_t>(k) * d * d, 0.0);

  // init: k-means with D^2 seeding; covariances from the per-cluster spread
  {
    const auto km = kmeans_fit(f, k, KmeansInit::dsquared, seed, 50, 1e-6);
    model.means = km.model.centroids;
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(km.labels[i]);
      ++counts[c];
      const auto s = f.sample(i);
      const auto mu = km.model.centroid(static_cast<int>(c));
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b <= a; ++b)
          model.covariances[c * d * d + a * d + b] +=
              (s[a] - mu[a]) * (s[b] - mu[b]);
    }
    for (int c = 0; c < k; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      const double denom = counts[ci] > 0 ? static_cast<double>(counts[ci]) : 1.0;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
          double v = model.covariances[ci * d * d + a * d + b] / denom;
          model.covariances[ci * d * d + a * d + b] = v;
          model.covariances[ci * d * d + b * d + a] = v;
        }
      for (std::size_t a = 0; a < d; ++a)
        model.covariances[ci * d * d + a * d + a] += cov_reg;
      model.weights[ci] = counts[ci] > 0
                              ? static_cast<double>(counts[ci]) / static_cast<double>(n)
                              : 1e-10;
    }
  }

  std::vector<double> resp(n * static_cast<std::size_t>(k));
  std::vector<detail::GaussianEval> gauss(static_cast<std::size_t>(k));
  std::vector<double> scratch, logp(static_cast<std::size_t>(k));

  // E-step: responsibilities for the current parameters; returns the mean
  // log-likelihood (Kahan-compensated total)
  auto e_step = [&]() {
    for (int c = 0; c < k; ++c)
      if (!gauss[static_cast<std::size_t>(c)].init(
              model.covariance(c).data(), d))
        throw std::runtime_error(
            "gmm_fit: covariance of component " + std::to_string(c) +
            " not positive-definite after regularization (cov_reg too small)");
    double ll = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = f.sample(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        logp[ci] = std::log(model.weights[ci]) +
                   gauss[ci].log_density(x, model.mean(c), scratch);
        mx = std::max(mx, logp[ci]);
      }
      double sum = 0.0;
      for (int c = 0; c < k; ++c)
        sum += std::exp(logp[static_cast<std::size_t>(c)] - mx);
      const double lse = mx + std::log(sum);
      for (int c = 0; c < k; ++c)
        resp[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)] =
            std::exp(logp[static_cast<std::size_t>(c)] - lse);
      const double y = lse - comp;
      const double t = ll + y;
      comp = (t - ll) - y;
      ll = t;
    }
    return ll / static_cast<double>(n);
  };

  double prev_ll = -std::numeric_limits<double>::infinity();
  bool converged = false;
  for (int iter = 1; iter <= max_iter; ++iter) {
    model.iterations = iter;
    const double mean_ll = e_step();
    model.log_likelihood_trace.push_back(mean_ll);
    if (iter > 1 && mean_ll - prev_ll < tol) {
      converged = true;  // responsibilities already match the current model
      break;
    }
    prev_ll = mean_ll;

    // M-step
    for (int c = 0; c < k; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        nk += resp[i * static_cast<std::size_t>(k) + ci];
      model.weights[ci] = nk / static_cast<double>(n);

      std::vector<double> mu(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * static_cast<std::size_t>(k) + ci];
        const auto x = f.sample(i);
        for (std::size_t a = 0; a < d; ++a) mu[a] += r * x[a];
      }
      for (std::size_t a = 0; a < d; ++a) mu[a] /= nk;

      std::vector<double> cov(d * d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * static_cast<std::size_t>(k) + ci];
        const auto x = f.sample(i);
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b <= a; ++b)
            cov[a * d + b] += r * (x[a] - mu[a]) * (x[b] - mu[b]);
      }
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
          const double v = cov[a * d + b] / nk;
          model.covariances[ci * d * d + a * d + b] = v;
          model.covariances[ci * d * d + b * d + a] = v;
        }
      for (std::size_t a = 0; a < d; ++a)
        model.covariances[ci * d * d + a * d + a] += cov_reg;
      for (std::size_t a = 0; a < d; ++a) model.means[ci * d + a] = mu[a];
    }
  }
  if (!converged)  // refresh responsibilities for the final parameters
    model.log_likelihood_trace.push_back(e_step());

  res.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -1.0;
    for (int c = 0; c < k; ++c) {
      const double r = resp[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)];
      if (r > best) {
        best = r;
        res.labels[i] = c;
      }
    }
  }
  return res;
}

}  // namespace terracomp
