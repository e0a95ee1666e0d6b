#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "stancelab/stats.hpp"

namespace stancelab {

const Coefficient* RegressionResult::find(std::string_view name) const {
  for (const Coefficient& c : coefficients)
    if (c.name == name) return &c;
  return nullptr;
}

std::string design_column(const CovariateSpec& c, const std::string& level) {
  switch (c.kind) {
    case CovariateKind::numeric: return c.name;
    case CovariateKind::count: return "log1p(" + c.name + ")";
    case CovariateKind::categorical: return c.name + "[" + level + "]";
  }
  return c.name;
}

namespace {

const CovariateValue& value_of(const CovariateRecord& r, const std::string& name, std::size_t row) {
  auto it = r.find(name);
  if (it == r.end()) throw Error("ols_regress: row " + std::to_string(row) + " lacks covariate '" + name + "'");
  return it->second;
}

double numeric_value(const CovariateRecord& r, const CovariateSpec& c, std::size_t row) {
  const CovariateValue& v = value_of(r, c.name, row);
  if (!std::holds_alternative<double>(v))
    throw Error("ols_regress: covariate '" + c.name + "' is not numeric at row " + std::to_string(row));
  const double x = std::get<double>(v);
  if (!std::isfinite(x)) throw Error("ols_regress: non-finite '" + c.name + "' at row " + std::to_string(row));
  if (c.kind == CovariateKind::count) {
    if (x < 0.0) throw Error("ols_regress: negative count '" + c.name + "' at row " + std::to_string(row));
    return std::log1p(x);
  }
  return x;
}

double normal_two_sided(double t) { return std::erfc(std::fabs(t) / M_SQRT2); }

}  // namespace

RegressionResult ols_regress(const std::vector<CovariateRecord>& records, std::span<const double> response,
                             const ModelSpec& spec) {
  const std::size_t n = records.size();
  if (response.size() != n) throw Error("ols_regress: response and record counts differ");

  RegressionResult result;
  std::vector<std::string> names{"(intercept)"};
  // For each design column after the intercept: covariate index and level.
  std::vector<std::pair<std::size_t, std::string>> source;
  for (std::size_t ci = 0; ci < spec.covariates.size(); ++ci) {
    const CovariateSpec& c = spec.covariates[ci];
    if (c.kind != CovariateKind::categorical) {
      names.push_back(design_column(c));
      source.emplace_back(ci, std::string());
      continue;
    }
    std::map<std::string, std::size_t> freq;
    for (std::size_t i = 0; i < n; ++i) {
      const CovariateValue& v = value_of(records[i], c.name, i);
      if (!std::holds_alternative<std::string>(v))
        throw Error("ols_regress: covariate '" + c.name + "' is not categorical at row " + std::to_string(i));
      ++freq[std::get<std::string>(v)];
    }
    std::string reference;
    if (c.reference) {
      if (freq.count(*c.reference) == 0)
        throw Error("ols_regress: reference level '" + *c.reference + "' of '" + c.name + "' does not occur");
      reference = *c.reference;
    } else {
      std::size_t best = 0;
      for (const auto& [level, count] : freq)
        if (count > best) {
          best = count;
          reference = level;
        }
    }
    for (const auto& [level, count] : freq) {
      if (level == reference) {
        result.dummy_coding.push_back(DummyLevel{c.name, level, ""});
        continue;
      }
      names.push_back(design_column(c, level));
      source.emplace_back(ci, level);
      result.dummy_coding.push_back(DummyLevel{c.name, level, names.back()});
    }
  }
  const std::size_t p = names.size();
  if (n <= p)
    throw Error("ols_regress: " + std::to_string(n) + " rows do not exceed " + std::to_string(p) + " design columns");

  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(response[i])) throw Error("ols_regress: non-finite response at row " + std::to_string(i));
    y(i) = response[i];
    x(i, 0) = 1.0;
    for (std::size_t j = 1; j < p; ++j) {
      const auto& [ci, level] = source[j - 1];
      const CovariateSpec& c = spec.covariates[ci];
      x(i, j) = c.kind == CovariateKind::categorical
                    ? (std::get<std::string>(records[i].at(c.name)) == level ? 1.0 : 0.0)
                    : numeric_value(records[i], c, i);
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  const auto rank = static_cast<std::size_t>(qr.rank());
  if (rank < p) {
    std::string dropped;
    const auto& perm = qr.colsPermutation().indices();
    for (std::size_t k = rank; k < p; ++k) dropped += (dropped.empty() ? "" : ", ") + names[perm(k)];
    throw Error("ols_regress: design matrix is rank deficient (rank " + std::to_string(rank) + " of " +
                std::to_string(p) + "); collinear columns: " + dropped);
  }
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - x * beta;

  // (X'X)^-1 = P R^-1 R^-T P' from the pivoted factorization.
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p),
                                                                      static_cast<Eigen::Index>(p)));
  const Eigen::MatrixXd cov_perm = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation().indices();
  Eigen::VectorXd diag(p);
  for (std::size_t k = 0; k < p; ++k) diag(perm(k)) = cov_perm(k, k);

  const double ssr = resid.squaredNorm();
  const double mean_y = y.mean();
  const double sst = (y.array() - mean_y).matrix().squaredNorm();
  const double dn = static_cast<double>(n), dp = static_cast<double>(p);
  result.n = n;
  result.p = p;
  result.mse = ssr / (dn - dp);
  result.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
  result.adj_r_squared = 1.0 - (1.0 - result.r_squared) * (dn - 1.0) / (dn - dp);
  if (p > 1) {
    if (ssr > 0.0) {
      result.f_statistic = ((sst - ssr) / (dp - 1.0)) / result.mse;
      const boost::math::fisher_f dist(dp - 1.0, dn - dp);
      result.f_p_value = result.f_statistic > 0.0 ? boost::math::cdf(boost::math::complement(dist, result.f_statistic)) : 1.0;
    } else {
      result.f_statistic = sst > 0.0 ? HUGE_VAL : 0.0;
      result.f_p_value = sst > 0.0 ? 0.0 : 1.0;
    }
  }
  result.log_likelihood = ssr > 0.0 ? -dn / 2.0 * (std::log(2.0 * M_PI * ssr / dn) + 1.0)
                                    : std::numeric_limits<double>::infinity();

  for (std::size_t j = 0; j < p; ++j) {
    Coefficient c;
    c.name = names[j];
    c.estimate = beta(static_cast<Eigen::Index>(j));
    c.std_error = std::sqrt(result.mse * diag(static_cast<Eigen::Index>(j)));
    c.ci_low = c.estimate - 1.96 * c.std_error;
    c.ci_high = c.estimate + 1.96 * c.std_error;
    c.t_value = c.std_error > 0.0 ? c.estimate / c.std_error : (c.estimate == 0.0 ? 0.0 : HUGE_VAL);
    c.p_value = normal_two_sided(c.t_value);
    result.coefficients.push_back(std::move(c));
  }
  result.residuals.assign(resid.data(), resid.data() + resid.size());
  return result;
}

}  // namespace stancelab
