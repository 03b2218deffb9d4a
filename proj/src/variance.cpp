#include "mb/variance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

#include "mb/kernels.hpp"

namespace mb {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Sums of products of centered pair gradients over one index set, split by
// how the two cells (a,b) and (c,d) of the implied quadruple overlap.
// The cell accessor returns the centered gradient component A_(a,b)[r].
struct OverlapSums {
  double q = 0.0;    // same cell twice:            sum ||A_ab||^2
  double x = 0.0;    // reversed cell:              sum A_ab . A_ba
  double rr = 0.0;   // shared first index:         sum_{b != c} A_ab . A_ac
  double cc = 0.0;   // shared second index:        sum_{b != c} A_ba . A_ca
  double rc = 0.0;   // first of one = second of the other (each direction)
  double s2 = 0.0;   // || sum of all cells ||^2
  double r2 = 0.0;   // sum_a || row sum ||^2
  double disjoint() const { return s2 - q - x - rr - cc - 2.0 * rc; }
};

// n x n cells, cell(a, b, r); O(n^2) per coordinate.
template <typename Cell>
OverlapSums overlap_sums(std::size_t n, std::size_t param_len, Cell cell) {
  OverlapSums out;
  std::vector<double> row(n), col(n), qrow(n), qcol(n), xrow(n);
  for (std::size_t r = 0; r < param_len; ++r) {
    std::fill(row.begin(), row.end(), 0.0);
    std::fill(col.begin(), col.end(), 0.0);
    std::fill(qrow.begin(), qrow.end(), 0.0);
    std::fill(qcol.begin(), qcol.end(), 0.0);
    std::fill(xrow.begin(), xrow.end(), 0.0);
    double s = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        const double v = cell(a, b, r);
        s += v;
        row[a] += v;
        col[b] += v;
        qrow[a] += v * v;
        qcol[b] += v * v;
        xrow[a] += v * cell(b, a, r);
      }
    }
    out.s2 += s * s;
    for (std::size_t a = 0; a < n; ++a) {
      out.q += qrow[a];
      out.x += xrow[a];
      out.rr += row[a] * row[a] - qrow[a];
      out.cc += col[a] * col[a] - qcol[a];
      out.rc += row[a] * col[a] - xrow[a];
      out.r2 += row[a] * row[a];
    }
  }
  return out;
}

OverlapSums table_overlap_sums(const PairGradTable& t) {
  return overlap_sums(t.m, t.param_len, [&](std::size_t a, std::size_t b, std::size_t r) {
    return t.pair_grads.at(a * t.m + b, r) - t.full_grad[r];
  });
}

}  // namespace

PairGradTable build_pair_grad_table(const EmbeddingState& state,
                                    const Dataset& ds,
                                    const PairWeighting& weighting,
                                    std::size_t max_m) {
  const std::size_t m = ds.size();
  if (m < 2) throw std::invalid_argument("pair grad table: need m >= 2");
  if (m > max_m)
    throw std::invalid_argument(
        "pair grad table: m=" + std::to_string(m) + " exceeds the " +
        std::to_string(max_m) +
        "-sample memory guard; use a smaller dataset or raise max_m");

  Mat inputs(m, ds.feature_dim);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = ds.sample(i);
    std::copy(row.begin(), row.end(), inputs.row(i));
  }
  const BatchActivations acts = forward_batch(state, inputs);
  const Mat& sigs = acts.signatures();

  PairGradTable table;
  table.m = m;
  table.param_len = state.param_len();
  table.pair_grads = Mat(m * m, table.param_len);
  const std::size_t nw = state.weights.size();

  Vec gsig_a(sigs.cols), gsig_b(sigs.cols), wgrad(nw);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      std::fill(gsig_a.begin(), gsig_a.end(), 0.0);
      std::fill(gsig_b.begin(), gsig_b.end(), 0.0);
      double gtheta = 0.0;
      const bool same = ds.labels[a] == ds.labels[b];
      const bool active = accumulate_pair_grad(
          state.theta, sigs.row_span(a), sigs.row_span(b), same,
          weighting.of(same), 1.0, gsig_a.data(), gsig_b.data(), gtheta);
      double* row = table.pair_grads.row(a * m + b);
      if (active) {
        std::fill(wgrad.begin(), wgrad.end(), 0.0);
        backward_sample(state, acts, a, gsig_a, wgrad);
        backward_sample(state, acts, b, gsig_b, wgrad);
        std::copy(wgrad.begin(), wgrad.end(), row);
      }
      row[nw] = gtheta;
    }
  }

  // Full gradient = mean over ordered pairs, accumulated in index order.
  table.full_grad.assign(table.param_len, 0.0);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      if (a != b)
        kernels::axpy(1.0, table.pair_grads.row(a * m + b),
                      table.full_grad.data(), table.param_len);
  const double inv = 1.0 / static_cast<double>(m * m - m);
  for (double& v : table.full_grad) v *= inv;
  return table;
}

double vanilla_variance(const PairGradTable& table) {
  const std::size_t m = table.m;
  double total = 0.0;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      if (a != b)
        total += kernels::sq_dist(table.pair_grads.row(a * m + b),
                                  table.full_grad.data(), table.param_len);
  return total / static_cast<double>(m * m - m);
}

double abar_term(const PairGradTable& table) {
  const std::size_t m = table.m;
  double total = 0.0;
  Vec row_mean(table.param_len);
  for (std::size_t a = 0; a < m; ++a) {
    std::fill(row_mean.begin(), row_mean.end(), 0.0);
    for (std::size_t b = 0; b < m; ++b)
      if (a != b)
        kernels::axpy(1.0, table.pair_grads.row(a * m + b), row_mean.data(),
                      table.param_len);
    const double inv = 1.0 / static_cast<double>(m - 1);
    for (std::size_t r = 0; r < table.param_len; ++r) {
      const double bar = row_mean[r] * inv - table.full_grad[r];
      total += bar * bar;
    }
  }
  return total / static_cast<double>(m);
}

double variance_bound(const PairGradTable& table, std::size_t k, double c3) {
  if (k < 2) throw std::invalid_argument("variance_bound: k >= 2 required");
  const double kk = static_cast<double>(k * k - k);
  return vanilla_variance(table) / kk +
         (c3 / static_cast<double>(k)) * abar_term(table);
}

std::uint64_t ordered_subsequence_count(std::size_t m, std::size_t k) {
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t factor = m - i;
    if (count > std::numeric_limits<std::uint64_t>::max() / factor)
      return std::numeric_limits<std::uint64_t>::max();
    count *= factor;
  }
  return count;
}

void for_each_ordered_subsequence(
    std::size_t m, std::size_t k,
    const std::function<void(std::span<const std::size_t>)>& fn) {
  if (k > m)
    throw std::invalid_argument("ordered subsequences: k exceeds m");
  std::vector<std::size_t> seq(k);
  std::vector<bool> used(m, false);
  const std::function<void(std::size_t)> rec = [&](std::size_t depth) {
    if (depth == k) {
      fn(seq);
      return;
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (used[i]) continue;
      used[i] = true;
      seq[depth] = i;
      rec(depth + 1);
      used[i] = false;
    }
  };
  rec(0);
}

Vec subset_gradient(const PairGradTable& table,
                    std::span<const std::size_t> idx) {
  const std::size_t n = idx.size();
  if (n < 2) throw std::invalid_argument("subset_gradient: need >= 2 indices");
  Vec g(table.param_len, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b)
        kernels::axpy(1.0, table.pair_grads.row(idx[a] * table.m + idx[b]),
                      g.data(), table.param_len);
  const double inv = 1.0 / static_cast<double>(n * n - n);
  for (double& v : g) v *= inv;
  return g;
}

Vec exhaustive_mean(const PairGradTable& table, std::size_t k) {
  Vec mean(table.param_len, 0.0);
  std::uint64_t count = 0;
  for_each_ordered_subsequence(table.m, k, [&](std::span<const std::size_t> idx) {
    const Vec g = subset_gradient(table, idx);
    kernels::axpy(1.0, g.data(), mean.data(), table.param_len);
    ++count;
  });
  for (double& v : mean) v /= static_cast<double>(count);
  return mean;
}

double exhaustive_variance(const PairGradTable& table, std::size_t k) {
  double total = 0.0;
  std::uint64_t count = 0;
  for_each_ordered_subsequence(table.m, k, [&](std::span<const std::size_t> idx) {
    const Vec g = subset_gradient(table, idx);
    total += kernels::sq_dist(g.data(), table.full_grad.data(), table.param_len);
    ++count;
  });
  return total / static_cast<double>(count);
}

Vec exhaustive_multibatch_mean(const EmbeddingState& state, const Dataset& ds,
                               std::size_t k, const PairWeighting& weighting) {
  Vec mean(state.param_len(), 0.0);
  std::uint64_t count = 0;
  for_each_ordered_subsequence(ds.size(), k, [&](std::span<const std::size_t> idx) {
    const GradientEstimate est = multibatch_on_indices(state, ds, idx, weighting);
    kernels::axpy(1.0, est.grad.data(), mean.data(), mean.size());
    ++count;
  });
  for (double& v : mean) v /= static_cast<double>(count);
  return mean;
}

VarianceReport empirical_variance(EstimatorKind kind,
                                  const EmbeddingState& state,
                                  const Dataset& ds, std::size_t k,
                                  std::size_t trials, std::uint64_t seed,
                                  const PairWeighting& weighting,
                                  const PairGradTable* table,
                                  unsigned threads) {
  if (trials < 2)
    throw std::invalid_argument("empirical_variance: need trials >= 2");
  const GradientEstimate exact = full_gradient(state, ds, weighting);

  std::vector<double> devs(trials);
  const auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) {
      Rng rng(seed ^ static_cast<std::uint64_t>(t));
      GradientEstimate est;
      switch (kind) {
        case EstimatorKind::full:
          est = exact;
          break;
        case EstimatorKind::pairwise_minibatch:
          est = pairwise_estimate(state, ds, k, weighting, rng);
          break;
        case EstimatorKind::multibatch:
          est = multibatch_estimate(state, ds, k, weighting, rng);
          break;
      }
      devs[t] = kernels::sq_dist(est.grad.data(), exact.grad.data(),
                                 exact.grad.size());
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(trials)));
  if (workers == 1) {
    run_range(0, trials);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (trials + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(trials, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  // Fixed-order reduction: the result is independent of the worker count.
  double mean = 0.0;
  for (double d : devs) mean += d;
  mean /= static_cast<double>(trials);
  double var = 0.0;
  for (double d : devs) var += (d - mean) * (d - mean);
  var /= static_cast<double>(trials - 1);

  VarianceReport report;
  report.kind = kind;
  report.k = k;
  report.trials = trials;
  report.empirical_variance = mean;
  report.std_error = std::sqrt(var / static_cast<double>(trials));
  if (table) {
    report.vanilla_variance = vanilla_variance(*table);
    report.abar_term = abar_term(*table);
    report.bound_value = variance_bound(*table, k);
  }
  return report;
}

void write_variance_csv(std::ostream& out,
                        std::span<const VarianceReport> reports) {
  out << "estimator,k,trials,empirical_variance,vanilla_variance,abar_term,"
         "bound_value\n";
  for (const VarianceReport& r : reports) {
    out << estimator_name(r.kind) << "," << r.k << "," << r.trials << ","
        << fmt_double(r.empirical_variance) << ","
        << fmt_double(r.vanilla_variance) << "," << fmt_double(r.abar_term)
        << "," << fmt_double(r.bound_value) << "\n";
  }
}

double variance_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2)
    throw std::invalid_argument("variance_slope: need at least two points");
  double mx = 0.0, my = 0.0;
  for (const auto& [k, v] : points) {
    if (k <= 0.0 || v <= 0.0)
      throw std::invalid_argument("variance_slope: nonpositive point");
    mx += std::log(k);
    my += std::log(v);
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [k, v] : points) {
    const double dx = std::log(k) - mx;
    sxy += dx * (std::log(v) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

OffdiagProductCheck offdiag_product_check(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2)
    throw std::invalid_argument("offdiag_product_check: need n >= 2");
  double sum = 0.0, sq = 0.0;
  for (double x : v) {
    sum += x;
    sq += x * x;
  }
  OffdiagProductCheck check;
  check.lhs = (sum * sum - sq) / static_cast<double>(n * n - n);
  const double mean = sum / static_cast<double>(n);
  check.rhs = mean * mean;
  check.holds = check.lhs <= check.rhs + 1e-12;
  return check;
}

VarianceDecomposition decomposition_diagnostic(const PairGradTable& table,
                                               std::size_t k,
                                               std::uint64_t seed,
                                               std::size_t trials,
                                               std::uint64_t exhaustive_limit) {
  const std::size_t m = table.m;
  if (k < 2 || k > m)
    throw std::invalid_argument("decomposition: k outside [2, m]");
  const double norm = static_cast<double>(k * k - k) *
                      static_cast<double>(k * k - k);
  const double dk = static_cast<double>(k);

  VarianceDecomposition out;
  if (ordered_subsequence_count(m, k) <= exhaustive_limit) {
    // Exact expectations: convert index-set sums into per-tuple expectations
    // and weight them by how many batch-position quadruples map onto each
    // overlap pattern.
    const OverlapSums sums = table_overlap_sums(table);
    const double dm = static_cast<double>(m);
    const double pairs = dm * (dm - 1.0);
    const double triples = pairs * (dm - 2.0);
    const double quads = triples * (dm - 3.0);

    const double e_same = sums.q / pairs;
    const double e_rev = sums.x / pairs;
    const double e_shared =
        m > 2 ? (sums.rr + sums.cc + 2.0 * sums.rc) / triples : 0.0;
    const double e_disjoint = m > 3 ? sums.disjoint() / quads : 0.0;

    const double c_pairs = dk * (dk - 1.0);
    out.identical = c_pairs * e_same / norm;
    out.shared = (c_pairs * e_rev + c_pairs * (dk - 2.0) * e_shared) / norm;
    out.disjoint = c_pairs * (dk - 2.0) * (dk - 3.0) * e_disjoint / norm;
    out.exhaustive = true;
    return out;
  }

  // Monte Carlo: for each sampled batch the three partial sums add up to
  // that batch's squared deviation exactly, so the totals stay consistent.
  if (trials < 2)
    throw std::invalid_argument("decomposition: need trials >= 2 for sampling");
  double sum_total = 0.0, sum_total_sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(seed ^ static_cast<std::uint64_t>(t));
    const std::vector<std::size_t> idx = rng.shuffle_k(m, k);
    const OverlapSums sums =
        overlap_sums(k, table.param_len, [&](std::size_t a, std::size_t b, std::size_t r) {
          return table.pair_grads.at(idx[a] * m + idx[b], r) -
                 table.full_grad[r];
        });
    out.identical += sums.q / norm;
    out.shared += (sums.x + sums.rr + sums.cc + 2.0 * sums.rc) / norm;
    out.disjoint += sums.disjoint() / norm;
    const double total = sums.s2 / norm;
    sum_total += total;
    sum_total_sq += total * total;
  }
  const double inv = 1.0 / static_cast<double>(trials);
  out.identical *= inv;
  out.shared *= inv;
  out.disjoint *= inv;
  out.trials = trials;
  const double mean = sum_total * inv;
  const double var =
      (sum_total_sq - static_cast<double>(trials) * mean * mean) /
      static_cast<double>(trials - 1);
  out.std_error = std::sqrt(std::max(0.0, var) * inv);
  return out;
}

}  // namespace mb
