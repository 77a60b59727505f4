#include "cgl/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cgl/errors.hpp"

namespace cgl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double sample_variance(std::span<const double> x, double mean) {
  if (x.size() < 2) return 0.0;
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - mean) * (x[i] - mean);
  return pairwise_sum(sq) / static_cast<double>(x.size() - 1);
}

std::vector<double> group_means(std::span<const double> x, std::size_t group_size) {
  const std::size_t groups = x.size() / group_size;
  std::vector<double> means(groups);
  for (std::size_t g = 0; g < groups; ++g)
    means[g] = pairwise_sum(x.subspan(g * group_size, group_size)) / static_cast<double>(group_size);
  return means;
}

}  // namespace

ActionAngle actions_angles(const ModeVector& v) {
  ActionAngle aa;
  aa.I.resize(v.size());
  aa.phi.resize(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    aa.I[k] = 0.5 * std::norm(v[k]);
    if (v[k] == std::complex<double>{0.0, 0.0}) {
      aa.phi[k] = 0.0;
    } else {
      double a = std::arg(v[k]);
      if (a < 0.0) a += kTwoPi;
      if (a >= kTwoPi) a = 0.0;
      aa.phi[k] = a;
    }
  }
  return aa;
}

double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 16) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

Estimate mean_estimate(std::span<const double> x, std::size_t group_size) {
  if (x.empty()) throw ValidationError("mean of an empty sample");
  if (group_size == 0 || x.size() % group_size != 0)
    throw ValidationError("sample size is not a multiple of the group size");
  Estimate e;
  e.mean = pairwise_sum(x) / static_cast<double>(x.size());
  const auto means = group_means(x, group_size);
  if (means.size() >= 2)
    e.se = std::sqrt(sample_variance(means, e.mean) / static_cast<double>(means.size()));
  return e;
}

double wasserstein1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("Wasserstein distance of an empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa.size() == sb.size()) {
    std::vector<double> d(sa.size());
    for (std::size_t i = 0; i < sa.size(); ++i) d[i] = std::abs(sa[i] - sb[i]);
    return pairwise_sum(d) / static_cast<double>(d.size());
  }
  // Quantile functions are step functions with jumps at i/na and j/nb.
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double t = 0.0, total = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double ta = static_cast<double>(i + 1) / na;
    const double tb = static_cast<double>(j + 1) / nb;
    const double next = std::min(ta, tb);
    total += std::abs(sa[i] - sb[j]) * (next - t);
    t = next;
    if (ta <= next) ++i;
    if (tb <= next) ++j;
  }
  return total;
}

double wasserstein1_bootstrap_se(std::span<const double> a, std::span<const double> b, int replicates,
                                 std::uint64_t seed) {
  if (replicates < 2) throw ValidationError("bootstrap needs at least two replicates");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_a(0, a.size() - 1), pick_b(0, b.size() - 1);
  std::vector<double> ra(a.size()), rb(b.size()), w(replicates);
  for (int r = 0; r < replicates; ++r) {
    for (auto& x : ra) x = a[pick_a(rng)];
    for (auto& x : rb) x = b[pick_b(rng)];
    w[r] = wasserstein1_1d(ra, rb);
  }
  const double mean = pairwise_sum(w) / replicates;
  return std::sqrt(sample_variance(w, mean));
}

CircularUniformity circular_uniformity(std::span<const double> angles) {
  if (angles.empty()) throw ValidationError("circular statistics of an empty sample");
  CircularUniformity out;
  out.n = angles.size();
  std::vector<double> c(angles.size()), s(angles.size()), u(angles.size());
  for (std::size_t i = 0; i < angles.size(); ++i) {
    c[i] = std::cos(angles[i]);
    s[i] = std::sin(angles[i]);
    double w = std::fmod(angles[i], kTwoPi);
    if (w < 0.0) w += kTwoPi;
    u[i] = w / kTwoPi;
  }
  const double n = static_cast<double>(angles.size());
  out.resultant = std::hypot(pairwise_sum(c), pairwise_sum(s)) / n;
  std::sort(u.begin(), u.end());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - u[i]);
    d = std::max(d, u[i] - static_cast<double>(i) / n);
  }
  out.ks = d;
  return out;
}

double occupation_below(std::span<const double> times, std::span<const double> values, double delta) {
  if (values.empty() || times.size() != values.size())
    throw ValidationError("occupation time needs matching nonempty time and value series");
  if (values.size() == 1) return values[0] <= delta ? 1.0 : 0.0;
  const double span = times.back() - times.front();
  if (!(span > 0.0)) throw ValidationError("occupation time needs increasing sample times");
  double below = 0.0;
  for (std::size_t s = 0; s + 1 < values.size(); ++s)
    if (values[s] <= delta) below += times[s + 1] - times[s];
  return below / span;
}

GaussianMoments gaussian_moment_check(std::span<const std::complex<double>> samples,
                                      std::size_t group_size) {
  if (samples.empty()) throw ValidationError("moments of an empty sample");
  if (group_size == 0 || samples.size() % group_size != 0)
    throw ValidationError("sample size is not a multiple of the group size");
  const std::size_t n = samples.size();
  std::vector<double> re(n), im(n), m2(n), m4(n);
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = samples[i].real();
    im[i] = samples[i].imag();
    m2[i] = std::norm(samples[i]);
    m4[i] = m2[i] * m2[i];
  }
  GaussianMoments out;
  out.n = n;
  const auto er = mean_estimate(re, group_size), ei = mean_estimate(im, group_size);
  out.mean = {er.mean, ei.mean};
  out.mean_se = std::hypot(er.se, ei.se);
  out.second = mean_estimate(m2, group_size);
  out.fourth = mean_estimate(m4, group_size);
  out.kurtosis_ratio.mean = out.fourth.mean / (2.0 * out.second.mean * out.second.mean);

  // Delete-one-group jackknife of the ratio.
  const auto g2 = group_means(m2, group_size), g4 = group_means(m4, group_size);
  const std::size_t groups = g2.size();
  if (groups >= 2) {
    const double s2 = pairwise_sum(g2), s4 = pairwise_sum(g4);
    const double gm1 = static_cast<double>(groups - 1);
    std::vector<double> loo(groups);
    for (std::size_t g = 0; g < groups; ++g) {
      const double a2 = (s2 - g2[g]) / gm1, a4 = (s4 - g4[g]) / gm1;
      loo[g] = a4 / (2.0 * a2 * a2);
    }
    const double mean = pairwise_sum(loo) / static_cast<double>(groups);
    std::vector<double> dev(groups);
    for (std::size_t g = 0; g < groups; ++g) dev[g] = (loo[g] - mean) * (loo[g] - mean);
    out.kurtosis_ratio.se = std::sqrt(gm1 / static_cast<double>(groups) * pairwise_sum(dev));
  }
  return out;
}

EnsembleSummary summarize(std::span<const ModeVector> samples, std::size_t group_size) {
  if (samples.empty()) throw ValidationError("summary of an empty ensemble");
  const Eigen::Index m = samples.front().size();
  EnsembleSummary out;
  out.samples_per_mode = samples.size();
  out.modes.resize(m);
  out.actions.assign(m, std::vector<double>(samples.size()));
  out.angles.assign(m, std::vector<double>(samples.size()));
  std::vector<std::complex<double>> vk(samples.size());
  for (Eigen::Index k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].size() != m) throw ValidationError("inconsistent mode counts in ensemble");
      vk[i] = samples[i][k];
      out.actions[k][i] = 0.5 * std::norm(vk[i]);
      double a = vk[i] == std::complex<double>{} ? 0.0 : std::arg(vk[i]);
      if (a < 0.0) a += kTwoPi;
      out.angles[k][i] = a;
    }
    auto& ms = out.modes[k];
    ms.mean_action = mean_estimate(out.actions[k], group_size);
    ms.energy = ms.mean_action.mean;
    ms.action_variance = sample_variance(out.actions[k], ms.mean_action.mean);
    ms.kurtosis_ratio = gaussian_moment_check(vk, group_size).kurtosis_ratio;
    ms.angles = circular_uniformity(out.angles[k]);
  }
  return out;
}

}  // namespace cgl
