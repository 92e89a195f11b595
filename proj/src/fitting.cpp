#include "dqm/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dqm/errors.hpp"

namespace dqm {

namespace {

// dense symmetric positive-definite solve; returns false when a pivot
// collapses (matrix numerically singular)
bool cholesky_factor(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double root = std::sqrt(d);
    a[j * n + j] = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / root;
    }
  }
  return true;
}

void cholesky_solve(const std::vector<double>& l, std::size_t n, std::vector<double>& b) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * b[k];
    b[i] = s / l[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * b[k];
    b[ii] = s / l[ii * n + ii];
  }
}

struct model_shape {
  std::size_t n_sets = 0;
  std::size_t n_comp = 0;
  std::vector<double> offsets;  // comb offsets, centered multiples of the splitting

  std::size_t n_params() const { return n_sets * (2 + n_comp); }
  // parameter layout per set: center, fwhm, then the component amplitudes
  std::size_t center_index(std::size_t s) const { return s * (2 + n_comp); }
  std::size_t fwhm_index(std::size_t s) const { return s * (2 + n_comp) + 1; }
  std::size_t amp_index(std::size_t s, std::size_t k) const {
    return s * (2 + n_comp) + 2 + k;
  }
};

// model value and parameter gradients at one frequency
void evaluate_point(const model_shape& shape, const std::vector<double>& p, double f,
                    double& value, double* grad) {
  value = 0.0;
  for (std::size_t s = 0; s < shape.n_sets; ++s) {
    const double c = p[shape.center_index(s)];
    const double g = 0.5 * p[shape.fwhm_index(s)];
    const double g2 = g * g;
    double d_center = 0.0;
    double d_g = 0.0;
    for (std::size_t k = 0; k < shape.n_comp; ++k) {
      const double a = p[shape.amp_index(s, k)];
      const double u = f - c - shape.offsets[k];
      const double den = u * u + g2;
      const double den2 = den * den;
      const double basis = -2.0 * g2 * u / den2;  // d/du of the unit Lorentzian
      if (grad) {
        grad[shape.amp_index(s, k)] = basis;
        // d(basis)/du and d(basis)/dg, chain-ruled below
        const double dbasis_du = -2.0 * g2 * (g2 - 3.0 * u * u) / (den2 * den);
        const double dbasis_dg = -4.0 * g * u * (u * u - g2) / (den2 * den);
        d_center += a * -dbasis_du;  // du/dc = -1
        d_g += a * dbasis_dg;
      }
      value += a * basis;
    }
    if (grad) {
      grad[shape.center_index(s)] = d_center;
      grad[shape.fwhm_index(s)] = 0.5 * d_g;  // g = fwhm / 2
    }
  }
}

double cost_at(const model_shape& shape, const std::vector<double>& p, const spectrum& data) {
  double ssr = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double v;
    evaluate_point(shape, p, data.frequencies_hz[i], v, nullptr);
    const double r = data.values[i] - v;
    ssr += r * r;
  }
  return ssr;
}

// smallest scaled pivot of the correlation-normalized normal matrix; a value
// near zero means some parameter direction is unconstrained by the data
double normal_matrix_health(const std::vector<double>& jtj, std::size_t n) {
  std::vector<double> c(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double di = jtj[i * n + i];
    if (!(di > 0.0)) return 0.0;
    for (std::size_t k = 0; k < n; ++k)
      c[i * n + k] = jtj[i * n + k] / std::sqrt(di * jtj[k * n + k]);
  }
  double min_pivot = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    double d = c[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= c[j * n + k] * c[j * n + k];
    if (!(d > 0.0) || !std::isfinite(d)) return 0.0;
    min_pivot = std::min(min_pivot, d);
    const double root = std::sqrt(d);
    c[j * n + j] = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = c[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= c[i * n + k] * c[j * n + k];
      c[i * n + j] = s / root;
    }
  }
  return min_pivot;
}

}  // namespace

sweep_fit_result fit_derivative_lorentzian_sum(const spectrum& data, std::size_t n_sets,
                                               double hyperfine_hz,
                                               const std::vector<double>& initial_centers_hz,
                                               double initial_fwhm_hz,
                                               std::size_t components_per_set) {
  if (n_sets == 0) throw invalid_argument_error("lineshape fit: need at least one set");
  if (components_per_set == 0)
    throw invalid_argument_error("lineshape fit: need at least one component per set");
  if (initial_centers_hz.size() != n_sets)
    throw invalid_argument_error("lineshape fit: one initial center per set required");
  if (!(initial_fwhm_hz > 0))
    throw invalid_argument_error("lineshape fit: initial width must be positive");
  if (hyperfine_hz < 0)
    throw invalid_argument_error("lineshape fit: negative hyperfine splitting");

  model_shape shape;
  shape.n_sets = n_sets;
  shape.n_comp = components_per_set;
  shape.offsets.resize(components_per_set);
  for (std::size_t k = 0; k < components_per_set; ++k)
    shape.offsets[k] =
        (static_cast<double>(k) - 0.5 * static_cast<double>(components_per_set - 1)) *
        hyperfine_hz;

  const std::size_t n_params = shape.n_params();
  const std::size_t m = data.size();
  if (m < n_params)
    throw invalid_argument_error("lineshape fit: fewer data points than parameters");

  std::vector<double> params(n_params, 0.0);
  for (std::size_t s = 0; s < n_sets; ++s) {
    params[shape.center_index(s)] = initial_centers_hz[s];
    params[shape.fwhm_index(s)] = initial_fwhm_hz;
  }

  // Amplitudes enter linearly: seed them from the normal equations at the
  // initial centers and width so the nonlinear iteration starts close and no
  // gradient column starts at zero.
  {
    const std::size_t na = n_sets * components_per_set;
    std::vector<double> ata(na * na, 0.0), aty(na, 0.0), basis(na);
    std::vector<double> grad(n_params);
    std::vector<double> probe = params;
    for (std::size_t s = 0; s < n_sets; ++s)
      for (std::size_t k = 0; k < components_per_set; ++k)
        probe[shape.amp_index(s, k)] = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      double v;
      evaluate_point(shape, probe, data.frequencies_hz[i], v, grad.data());
      std::size_t idx = 0;
      for (std::size_t s = 0; s < n_sets; ++s)
        for (std::size_t k = 0; k < components_per_set; ++k)
          basis[idx++] = grad[shape.amp_index(s, k)];
      for (std::size_t r = 0; r < na; ++r) {
        aty[r] += basis[r] * data.values[i];
        for (std::size_t c = 0; c <= r; ++c) ata[r * na + c] += basis[r] * basis[c];
      }
    }
    for (std::size_t r = 0; r < na; ++r)
      for (std::size_t c = r + 1; c < na; ++c) ata[r * na + c] = ata[c * na + r];
    if (normal_matrix_health(ata, na) < 1e-12)
      throw fit_degeneracy_error(
          "lineshape fit: component amplitudes are not separable (coincident sets?)");
    if (!cholesky_factor(ata, na))
      throw fit_degeneracy_error("lineshape fit: singular amplitude system");
    cholesky_solve(ata, na, aty);
    std::size_t idx = 0;
    for (std::size_t s = 0; s < n_sets; ++s)
      for (std::size_t k = 0; k < components_per_set; ++k)
        params[shape.amp_index(s, k)] = aty[idx++];
  }

  std::vector<double> jtj(n_params * n_params);
  std::vector<double> jtr(n_params);
  std::vector<double> grad(n_params);
  std::vector<double> step(n_params);
  std::vector<double> damped(n_params * n_params);

  double cost = cost_at(shape, params, data);
  double lambda = 1e-3;
  std::size_t iteration = 0;
  bool converged = false;

  for (; iteration < 200 && !converged; ++iteration) {
    std::fill(jtj.begin(), jtj.end(), 0.0);
    std::fill(jtr.begin(), jtr.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double v;
      evaluate_point(shape, params, data.frequencies_hz[i], v, grad.data());
      const double r = data.values[i] - v;
      for (std::size_t a = 0; a < n_params; ++a) {
        jtr[a] += grad[a] * r;
        for (std::size_t b = 0; b <= a; ++b) jtj[a * n_params + b] += grad[a] * grad[b];
      }
    }
    for (std::size_t a = 0; a < n_params; ++a)
      for (std::size_t b = a + 1; b < n_params; ++b)
        jtj[a * n_params + b] = jtj[b * n_params + a];

    if (iteration == 0 && normal_matrix_health(jtj, n_params) < 1e-12)
      throw fit_degeneracy_error(
          "lineshape fit: normal equations singular at the starting point");

    bool accepted = false;
    while (!accepted) {
      damped = jtj;
      for (std::size_t a = 0; a < n_params; ++a)
        damped[a * n_params + a] *= 1.0 + lambda;
      step = jtr;
      if (cholesky_factor(damped, n_params)) {
        cholesky_solve(damped, n_params, step);
        std::vector<double> trial = params;
        for (std::size_t a = 0; a < n_params; ++a) trial[a] += step[a];
        if (trial[shape.fwhm_index(0)] > 0) {  // keep widths physical
          bool widths_ok = true;
          for (std::size_t s = 0; s < n_sets; ++s)
            widths_ok = widths_ok && trial[shape.fwhm_index(s)] > 0;
          if (widths_ok) {
            const double trial_cost = cost_at(shape, trial, data);
            if (trial_cost < cost) {
              double rel_step = 0.0;
              for (std::size_t a = 0; a < n_params; ++a) {
                const double scale = std::max(std::abs(params[a]), std::abs(trial[a]));
                if (scale > 0) rel_step = std::max(rel_step, std::abs(step[a]) / scale);
              }
              params = std::move(trial);
              cost = trial_cost;
              lambda = std::max(lambda * 0.1, 1e-12);
              accepted = true;
              if (rel_step < 1e-8) converged = true;
              break;
            }
          }
        }
      }
      lambda *= 10.0;
      if (lambda > 1e12) {
        // Damping exhausted: no step in any direction improves the cost at
        // double precision. At a genuine minimum that is convergence, and the
        // residual is then nearly orthogonal to every Jacobian column; a
        // start too far off the data stalls the same way but keeps a clear
        // gradient angle, and that case stays an error.
        double gmax = 0.0;
        for (std::size_t a = 0; a < n_params; ++a) {
          const double den = std::sqrt(jtj[a * n_params + a] * cost);
          if (den > 0) gmax = std::max(gmax, std::abs(jtr[a]) / den);
        }
        if (gmax < 1e-6) {
          converged = true;
          break;
        }
        throw fit_error("lineshape fit: diverged (damping exhausted)");
      }
    }
  }

  // covariance from the undamped normal equations at the optimum
  std::fill(jtj.begin(), jtj.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double v;
    evaluate_point(shape, params, data.frequencies_hz[i], v, grad.data());
    for (std::size_t a = 0; a < n_params; ++a)
      for (std::size_t b = 0; b <= a; ++b) jtj[a * n_params + b] += grad[a] * grad[b];
  }
  for (std::size_t a = 0; a < n_params; ++a)
    for (std::size_t b = a + 1; b < n_params; ++b)
      jtj[a * n_params + b] = jtj[b * n_params + a];

  const double ssr = cost;
  const double dof = static_cast<double>(m > n_params ? m - n_params : 1);
  const double variance = ssr / dof;

  std::vector<double> covariance_diag(n_params, 0.0);
  {
    std::vector<double> l = jtj;
    if (cholesky_factor(l, n_params)) {
      std::vector<double> e(n_params);
      for (std::size_t a = 0; a < n_params; ++a) {
        std::fill(e.begin(), e.end(), 0.0);
        e[a] = 1.0;
        cholesky_solve(l, n_params, e);
        covariance_diag[a] = e[a] * variance;
      }
    }
  }

  sweep_fit_result result;
  result.iterations = iteration;
  result.residual_rms = std::sqrt(ssr / static_cast<double>(m));
  for (std::size_t s = 0; s < n_sets; ++s) {
    lineshape_fit fit;
    fit.center_hz = params[shape.center_index(s)];
    fit.fwhm_hz = params[shape.fwhm_index(s)];
    for (std::size_t k = 0; k < components_per_set; ++k)
      fit.amplitudes.push_back(params[shape.amp_index(s, k)]);
    fit.center_stderr_hz = std::sqrt(std::max(covariance_diag[shape.center_index(s)], 0.0));
    fit.fwhm_stderr_hz = std::sqrt(std::max(covariance_diag[shape.fwhm_index(s)], 0.0));
    result.sets.push_back(std::move(fit));
  }
  std::sort(result.sets.begin(), result.sets.end(),
            [](const lineshape_fit& a, const lineshape_fit& b) {
              return a.center_hz < b.center_hz;
            });
  return result;
}

proportional_fit_result fit_proportional(const std::vector<double>& x,
                                         const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty())
    throw invalid_argument_error("fit_proportional: mismatched or empty inputs");
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  if (!(sxx > 0)) throw fit_error("fit_proportional: abscissae are all zero");

  proportional_fit_result out;
  out.slope = sxy / sxx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - out.slope * x[i];
    ssr += r * r;
  }
  const double dof = static_cast<double>(x.size() > 1 ? x.size() - 1 : 1);
  out.slope_stderr = std::sqrt(ssr / dof / sxx);
  return out;
}

}  // namespace dqm
