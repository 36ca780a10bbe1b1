// Copyright 2026 The mpmcp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "correlation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "error.hpp"

namespace mpmcp {

namespace {

constexpr double kPsdFloor = -1e-8;

struct Layout {
  std::vector<RowKey> rows;
  std::vector<std::size_t> pop_of_row;  // index into the contrast span
  std::vector<const std::vector<double>*> coef;
};

Layout layout(const DoseDesign& design, std::span<const PopulationContrasts> contrasts) {
  Layout l;
  for (std::size_t p = 0; p < contrasts.size(); ++p) {
    design.members(contrasts[p].population);  // throws if unknown
    for (const auto& c : contrasts[p].contrasts) {
      require(c.coef.size() == design.num_doses(), "contrast length differs from the number of doses");
      l.rows.push_back({contrasts[p].population, c.shape});
      l.pop_of_row.push_back(p);
      l.coef.push_back(&c.coef);
    }
  }
  require(!l.rows.empty(), "no contrasts supplied");
  return l;
}

// Symmetrises, checks the PSD floor and clips rounding-level negative
// eigenvalues so downstream factorizations see a valid correlation matrix.
Eigen::MatrixXd finalize(Eigen::MatrixXd r) {
  r = 0.5 * (r + r.transpose());
  r.diagonal().setOnes();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin < kPsdFloor)
    fail(Errc::numerical, "correlation matrix is not positive semidefinite (smallest eigenvalue " +
                              std::to_string(lmin) + ")");
  if (lmin < 0.0) {
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd fixed = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    Eigen::VectorXd d = fixed.diagonal().cwiseSqrt().cwiseInverse();
    r = d.asDiagonal() * fixed * d.asDiagonal();
    r = 0.5 * (r + r.transpose());
    r.diagonal().setOnes();
  }
  return r.cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace

CorrelationMatrix::CorrelationMatrix(Eigen::MatrixXd values, std::vector<RowKey> rows)
    : values_(std::move(values)), rows_(std::move(rows)) {
  require(values_.rows() == values_.cols() && static_cast<std::size_t>(values_.rows()) == rows_.size(),
          "correlation matrix dimension mismatch");
}

double CorrelationMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(values_, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void CorrelationMatrix::write_csv(std::ostream& out) const {
  std::ostringstream buf;
  buf << std::setprecision(std::numeric_limits<double>::max_digits10);
  buf << "row";
  for (const auto& r : rows_) buf << ',' << r.population << ':' << r.shape;
  buf << '\n';
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    buf << rows_[i].population << ':' << rows_[i].shape;
    for (std::size_t j = 0; j < rows_.size(); ++j) buf << ',' << values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    buf << '\n';
  }
  out << buf.str();
}

VarianceSpec VarianceSpec::homoscedastic(const DoseDesign& design, double variance) {
  require(variance > 0.0 && std::isfinite(variance), "variance must be positive");
  VarianceSpec v;
  v.values_.assign(design.variance_groups().size(), variance);
  return v;
}

VarianceSpec VarianceSpec::per_population(const DoseDesign& design,
                                          const std::vector<std::pair<Label, double>>& values) {
  VarianceSpec v;
  for (const auto& g : design.variance_groups()) {
    auto it = std::find_if(values.begin(), values.end(), [&](const auto& p) { return p.first == g.label; });
    require(it != values.end(), "no variance given for population '" + g.label + "'");
    require(it->second > 0.0 && std::isfinite(it->second),
            "variance of population '" + g.label + "' must be positive");
    v.values_.push_back(it->second);
  }
  return v;
}

CorrelationMatrix corr_homoscedastic(const DoseDesign& design, std::span<const PopulationContrasts> contrasts) {
  const auto l = layout(design, contrasts);
  const std::size_t k = design.num_doses();
  const std::size_t np = contrasts.size();

  std::vector<std::vector<double>> n(np);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = design.group_size(contrasts[p].population, i);
      if (c <= 0)
        fail(Errc::invalid_argument, "zero cell count for population '" + contrasts[p].population +
                                         "' at dose index " + std::to_string(i));
      n[p].push_back(static_cast<double>(c));
    }
  }
  std::vector<std::vector<double>> both(np * np);
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t q = 0; q < np; ++q)
      for (std::size_t i = 0; i < k; ++i)
        both[p * np + q].push_back(
            static_cast<double>(design.intersection_size(contrasts[p].population, contrasts[q].population, i)));

  const std::size_t dim = l.rows.size();
  std::vector<double> self(dim, 0.0);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t i = 0; i < k; ++i) self[r] += (*l.coef[r])[i] * (*l.coef[r])[i] / n[l.pop_of_row[r]][i];

  Eigen::MatrixXd m(dim, dim);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      const std::size_t p = l.pop_of_row[a];
      const std::size_t q = l.pop_of_row[b];
      double num = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        num += (*l.coef[a])[i] * (*l.coef[b])[i] * both[p * np + q][i] / (n[p][i] * n[q][i]);
      m(a, b) = m(b, a) = num / std::sqrt(self[a] * self[b]);
    }
  }
  return CorrelationMatrix(finalize(std::move(m)), l.rows);
}

CorrelationMatrix corr_heteroscedastic(const DoseDesign& design, std::span<const PopulationContrasts> contrasts,
                                       const VarianceSpec& variances) {
  for (std::size_t p = 1; p < contrasts.size(); ++p) {
    require(contrasts[p].contrasts.size() == contrasts[0].contrasts.size(),
            "heteroscedastic correlation expects one candidate set shared by all populations");
    for (std::size_t m = 0; m < contrasts[p].contrasts.size(); ++m)
      require(contrasts[p].contrasts[m].shape == contrasts[0].contrasts[m].shape,
              "heteroscedastic correlation expects one candidate set shared by all populations");
  }
  return corr_general(design, contrasts, variances);
}

CorrelationMatrix corr_general(const DoseDesign& design, std::span<const PopulationContrasts> contrasts,
                               const VarianceSpec& variances) {
  const auto l = layout(design, contrasts);
  const std::size_t k = design.num_doses();
  const std::size_t np = contrasts.size();
  const auto& groups = design.variance_groups();
  const auto& sigma2 = variances.values();
  require(sigma2.size() == groups.size(), "variance spec does not match the design's variance family");
  for (double s : sigma2) require(s > 0.0 && std::isfinite(s), "variances must be positive");

  std::vector<std::vector<std::size_t>> members(np);
  std::vector<std::vector<double>> n(np);
  for (std::size_t p = 0; p < np; ++p) {
    members[p] = design.members(contrasts[p].population);
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = design.group_size(contrasts[p].population, i);
      if (c <= 0)
        fail(Errc::invalid_argument, "zero cell count for population '" + contrasts[p].population +
                                         "' at dose index " + std::to_string(i));
      n[p].push_back(static_cast<double>(c));
    }
  }
  // w[p][q][i] = sum over V members common to p and q of n_i * sigma^2.
  std::vector<std::vector<double>> w(np * np, std::vector<double>(k, 0.0));
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t q = 0; q < np; ++q)
      for (auto v : members[p])
        if (std::binary_search(members[q].begin(), members[q].end(), v))
          for (std::size_t i = 0; i < k; ++i)
            w[p * np + q][i] += static_cast<double>(groups[v].sizes[i]) * sigma2[v];

  const std::size_t dim = l.rows.size();
  Eigen::MatrixXd cov(dim, dim);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      const std::size_t p = l.pop_of_row[a];
      const std::size_t q = l.pop_of_row[b];
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        s += (*l.coef[a])[i] * (*l.coef[b])[i] * w[p * np + q][i] / (n[p][i] * n[q][i]);
      cov(a, b) = cov(b, a) = s;
    }
  }
  Eigen::VectorXd inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd r = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  return CorrelationMatrix(finalize(std::move(r)), l.rows);
}

}  // namespace mpmcp
