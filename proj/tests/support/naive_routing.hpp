#pragma once

// Deliberately plain scalar-loop reference for routing-by-agreement and the
// margin loss, independent of the Tensor/Tape machinery.

#include <cmath>
#include <vector>

namespace capsnet::testing {

struct NaiveRoutingResult {
  std::vector<std::vector<double>> capsules;  // [J][V]
  std::vector<std::vector<double>> coupling;  // [n][J]
};

inline std::vector<double> naive_squash(const std::vector<double>& s) {
  double norm_sq = 0.0;
  for (double x : s) norm_sq += x * x;
  const double norm = std::sqrt(norm_sq);
  std::vector<double> v(s.size(), 0.0);
  if (norm == 0.0) return v;
  const double scale = norm_sq / (1.0 + norm_sq) / norm;
  for (std::size_t k = 0; k < s.size(); ++k) v[k] = scale * s[k];
  return v;
}

// votes laid out as votes[i][j][k] = flat[(i*J + j)*V + k]
inline NaiveRoutingResult naive_route(const std::vector<double>& votes, int n, int J, int V,
                                      int r) {
  std::vector<std::vector<double>> b(n, std::vector<double>(J, 0.0));
  NaiveRoutingResult out;
  for (int iter = 0; iter < r; ++iter) {
    out.coupling.assign(n, std::vector<double>(J, 0.0));
    for (int i = 0; i < n; ++i) {
      double mx = b[i][0];
      for (int j = 1; j < J; ++j) mx = std::max(mx, b[i][j]);
      double z = 0.0;
      for (int j = 0; j < J; ++j) z += std::exp(b[i][j] - mx);
      for (int j = 0; j < J; ++j) out.coupling[i][j] = std::exp(b[i][j] - mx) / z;
    }
    out.capsules.assign(J, std::vector<double>(V, 0.0));
    for (int j = 0; j < J; ++j) {
      std::vector<double> s(V, 0.0);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < V; ++k) s[k] += out.coupling[i][j] * votes[(i * J + j) * V + k];
      out.capsules[j] = naive_squash(s);
    }
    if (iter + 1 < r)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < J; ++j) {
          double dot = 0.0;
          for (int k = 0; k < V; ++k) dot += votes[(i * J + j) * V + k] * out.capsules[j][k];
          b[i][j] += dot;
        }
  }
  return out;
}

inline double naive_margin_loss(const std::vector<double>& norms, int label, double m_plus,
                                double m_minus, double lambda) {
  double loss = 0.0;
  for (std::size_t j = 0; j < norms.size(); ++j) {
    if (static_cast<int>(j) == label) {
      const double h = std::max(0.0, m_plus - norms[j]);
      loss += h * h;
    } else {
      const double h = std::max(0.0, norms[j] - m_minus);
      loss += lambda * h * h;
    }
  }
  return loss;
}

}  // namespace capsnet::testing
