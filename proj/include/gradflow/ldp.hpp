#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "gradflow/errors.hpp"
#include "gradflow/measures.hpp"
#include "gradflow/numerics.hpp"

namespace gradflow {

// ---------------------------------------------------------------------------
// Fair coin

/// I(a) = a log a + (1−a) log(1−a) + log 2 on [0,1], +∞ outside.
inline double coin_rate(double a) {
  if (!(a >= 0.0 && a <= 1.0)) return kInfinity;
  return xlogx(a) + xlogx(1.0 - a) + std::log(2.0);
}

/// −(1/n) log P(S_n ≥ an) for n fair tosses, in log space.
inline double coin_tail_exact(std::size_t n, double a) {
  detail::require(n >= 1 && n <= 100000, "coin_tail_exact: need 1 ≤ n ≤ 1e5");
  detail::require(a >= 0.5 && a <= 1.0, "coin_tail_exact: need 1/2 ≤ a ≤ 1");
  const double nd = static_cast<double>(n);
  const auto k_min = static_cast<std::size_t>(std::ceil(a * nd - 1e-9));
  std::vector<double> terms;
  terms.reserve(n - k_min + 1);
  const double log_half = -nd * std::log(2.0);
  for (std::size_t k = k_min; k <= n; ++k) {
    const double kd = static_cast<double>(k);
    terms.push_back(std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) + log_half);
  }
  return -log_sum_exp(terms) / nd;
}

// ---------------------------------------------------------------------------
// Finite-alphabet Sanov / Varadhan

struct FiniteLdpProblem {
  std::vector<double> mu;    // reference law on {0..|I|−1}
  std::vector<double> tilt;  // F; empty for none
  std::size_t n = 1;         // sample size

  std::size_t alphabet() const { return mu.size(); }

  void validate() const {
    detail::require(mu.size() >= 1, "FiniteLdpProblem: empty alphabet");
    double s = 0.0;
    for (double m : mu) {
      detail::require(m > 0.0 && std::isfinite(m), "FiniteLdpProblem: reference weights must be positive");
      s += m;
    }
    detail::require(std::abs(s - 1.0) <= 1e-12, "FiniteLdpProblem: reference weights must sum to 1");
    detail::require(tilt.empty() || tilt.size() == mu.size(), "FiniteLdpProblem: tilt must have one value per state");
    for (double f : tilt) detail::require(std::isfinite(f), "FiniteLdpProblem: tilt must be finite");
    detail::require(n >= 1, "FiniteLdpProblem: n must be ≥ 1");
  }

  double tilt_at(std::size_t i) const { return tilt.empty() ? 0.0 : tilt[i]; }
};

/// Half-space {ρ : Σ_i c_i ρ_i ≥ b} on the simplex.
struct LinearConstraint {
  std::vector<double> c;
  double b = 0.0;

  bool contains(const std::vector<double>& rho) const {
    double s = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) s += c[i] * rho[i];
    return s >= b - 1e-12;
  }

  /// ρ₁ ≥ a style constraint on state `index`.
  static LinearConstraint at_least(std::size_t alphabet, std::size_t index, double a) {
    LinearConstraint lc{std::vector<double>(alphabet, 0.0), a};
    lc.c[index] = 1.0;
    return lc;
  }
};

namespace detail {

inline void check_enumeration(const FiniteLdpProblem& p) {
  p.validate();
  require<SizeError>(p.alphabet() <= 5, "exact enumeration: alphabet size must be ≤ 5");
  require<SizeError>(p.n <= 120, "exact enumeration: n must be ≤ 120");
}

/// Calls f(k) for every occupation vector k with Σk = n.
template <typename F>
void for_each_type(std::size_t alphabet, std::size_t n, F&& f) {
  std::vector<std::size_t> k(alphabet, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
    if (i + 1 == alphabet) {
      k[i] = left;
      f(k);
      return;
    }
    for (std::size_t v = 0; v <= left; ++v) {
      k[i] = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, n);
}

/// log multinomial(n; k) + Σ k_i log w_i.
inline double log_type_weight(const std::vector<std::size_t>& k, const std::vector<double>& log_w) {
  double n = 0.0, v = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double ki = static_cast<double>(k[i]);
    n += ki;
    v += -std::lgamma(ki + 1.0) + ki * log_w[i];
  }
  return v + std::lgamma(n + 1.0);
}

/// Online log-sum-exp accumulator.
struct LogSum {
  double peak = -kInfinity;
  double sum = 0.0;
  void add(double v) {
    if (v == -kInfinity) return;
    if (v > peak) {
      sum = sum * std::exp(peak - v) + 1.0;
      peak = v;
    } else {
      sum += std::exp(v - peak);
    }
  }
  double value() const { return peak == -kInfinity ? -kInfinity : peak + std::log(sum); }
};

inline std::vector<double> type_frequencies(const std::vector<std::size_t>& k, std::size_t n) {
  std::vector<double> r(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) r[i] = static_cast<double>(k[i]) / static_cast<double>(n);
  return r;
}

/// sup_{λ≥0} λ·b − log Σ ν_i exp((Cᵀλ)_i), by coordinate ascent.
inline double constrained_entropy_dual(const std::vector<double>& nu, const std::vector<LinearConstraint>& cons) {
  const std::size_t m = cons.size(), d = nu.size();
  if (m == 0) return 0.0;
  std::vector<double> lambda(m, 0.0);
  auto dual = [&](const std::vector<double>& lam, std::vector<double>* tilted) {
    std::vector<double> logs(d);
    for (std::size_t i = 0; i < d; ++i) {
      double e = 0.0;
      for (std::size_t j = 0; j < m; ++j) e += lam[j] * cons[j].c[i];
      logs[i] = std::log(nu[i]) + e;
    }
    const double lz = log_sum_exp(logs);
    if (tilted) {
      tilted->resize(d);
      for (std::size_t i = 0; i < d; ++i) (*tilted)[i] = std::exp(logs[i] - lz);
    }
    double v = -lz;
    for (std::size_t j = 0; j < m; ++j) v += lam[j] * cons[j].b;
    return v;
  };
  // Feasibility: a constraint above the max of its c over the simplex is never satisfied.
  for (const auto& c : cons) {
    const double cmax = *std::max_element(c.c.begin(), c.c.end());
    if (c.b > cmax + 1e-12) return kInfinity;
  }
  double value = dual(lambda, nullptr);
  for (std::size_t sweep = 0; sweep < 10000; ++sweep) {
    const double before = value;
    for (std::size_t j = 0; j < m; ++j) {
      // Derivative in λ_j: b_j − E_{ν_λ}[c_j], decreasing in λ_j.
      auto slope = [&](double l) {
        std::vector<double> lam(lambda), t;
        lam[j] = l;
        dual(lam, &t);
        double e = 0.0;
        for (std::size_t i = 0; i < d; ++i) e += t[i] * cons[j].c[i];
        return cons[j].b - e;
      };
      if (slope(0.0) <= 0.0) {
        lambda[j] = 0.0;
        continue;
      }
      double hi = 1.0;
      while (slope(hi) > 0.0 && hi < 1e6) hi *= 2.0;
      double lo = 0.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) > 0.0 ? lo : hi) = mid;
      }
      lambda[j] = 0.5 * (lo + hi);
    }
    value = dual(lambda, nullptr);
    if (std::abs(value - before) <= 1e-15 * (1.0 + std::abs(value))) break;
  }
  return std::max(0.0, value);
}

}  // namespace detail

struct SanovResult {
  double exact_rate = 0.0;   // −(1/n) log P(empirical type ∈ set)
  double inf_entropy = 0.0;  // inf over the set of H(ρ|μ), or of Ĩ when tilted
  std::size_t types_in_set = 0;
  std::size_t types_total = 0;
};

/// Exact enumeration of the (optionally tilted) type law against the limit rate.
///
/// With a tilt F the type law is μ̃_n(k) ∝ multinomial(n;k) Π μ_i^{k_i} e^{−n⟨F,k/n⟩}
/// and the limit rate is Ĩ(ρ) = H(ρ|μ) + ⟨F,ρ⟩ − inf(H + ⟨F,·⟩).
inline SanovResult sanov_exact(const FiniteLdpProblem& problem, const std::vector<LinearConstraint>& set) {
  detail::check_enumeration(problem);
  const std::size_t d = problem.alphabet();
  for (const auto& c : set) detail::require(c.c.size() == d, "sanov_exact: constraint size must equal alphabet size");
  std::vector<double> log_w(d);
  for (std::size_t i = 0; i < d; ++i) log_w[i] = std::log(problem.mu[i]) - problem.tilt_at(i);

  detail::LogSum in_set, all;
  SanovResult out;
  detail::for_each_type(d, problem.n, [&](const std::vector<std::size_t>& k) {
    const double lw = detail::log_type_weight(k, log_w);
    all.add(lw);
    ++out.types_total;
    const auto rho = detail::type_frequencies(k, problem.n);
    bool member = true;
    for (const auto& c : set) member = member && c.contains(rho);
    if (member) {
      in_set.add(lw);
      ++out.types_in_set;
    }
  });
  const double nd = static_cast<double>(problem.n);
  out.exact_rate = out.types_in_set ? -(in_set.value() - all.value()) / nd : kInfinity;

  // Ĩ = H(ρ|μ̃) with μ̃ ∝ μ e^{−F}, since H(ρ|μ) + ⟨F,ρ⟩ = H(ρ|μ̃) − log Σ μ e^{−F}.
  const double lz = log_sum_exp(log_w);
  std::vector<double> tilted(d);
  for (std::size_t i = 0; i < d; ++i) tilted[i] = std::exp(log_w[i] - lz);
  out.inf_entropy = detail::constrained_entropy_dual(tilted, set);
  return out;
}

struct TiltedTypeRow {
  std::vector<std::size_t> type;
  double exact_rate = 0.0;  // −(1/n) log μ̃_n(type)
  double limit_rate = 0.0;  // Ĩ(type/n)
};

struct TiltedRateTable {
  std::vector<TiltedTypeRow> rows;
  std::size_t argmin_exact = 0;  // row index of the most probable type
  std::size_t argmin_limit = 0;  // row index minimizing Ĩ
  std::vector<double> minimizer;  // ρ* ∝ μ e^{−F}
};

inline TiltedRateTable varadhan_tilt(const FiniteLdpProblem& problem) {
  detail::check_enumeration(problem);
  const std::size_t d = problem.alphabet();
  std::vector<double> log_w(d);
  for (std::size_t i = 0; i < d; ++i) log_w[i] = std::log(problem.mu[i]) - problem.tilt_at(i);
  // inf(H(·|μ) + ⟨F,·⟩) = −log Σ μ_i e^{−F_i}
  const double inf_free = -log_sum_exp(log_w);

  TiltedRateTable table;
  detail::LogSum all;
  std::vector<double> logs;
  detail::for_each_type(d, problem.n, [&](const std::vector<std::size_t>& k) {
    const double lw = detail::log_type_weight(k, log_w);
    all.add(lw);
    logs.push_back(lw);
    TiltedTypeRow row;
    row.type = k;
    const auto rho = detail::type_frequencies(k, problem.n);
    double h = 0.0;
    for (std::size_t i = 0; i < d; ++i) h += xlogx(rho[i]) - rho[i] * std::log(problem.mu[i]) + problem.tilt_at(i) * rho[i];
    row.limit_rate = h - inf_free;
    table.rows.push_back(std::move(row));
  });
  const double nd = static_cast<double>(problem.n);
  const double lz = all.value();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    table.rows[r].exact_rate = -(logs[r] - lz) / nd;
    if (table.rows[r].exact_rate < table.rows[table.argmin_exact].exact_rate) table.argmin_exact = r;
    if (table.rows[r].limit_rate < table.rows[table.argmin_limit].limit_rate) table.argmin_limit = r;
  }
  table.minimizer.resize(d);
  for (std::size_t i = 0; i < d; ++i) table.minimizer[i] = std::exp(log_w[i] + inf_free);
  return table;
}

// ---------------------------------------------------------------------------
// Degeneracy counting and path actions

struct LogDegeneracy {
  double exact = 0.0;          // log(N! / Π k_i!)
  double approximation = 0.0;  // −N Σ (k_i/N) log(k_i/N)
};

inline LogDegeneracy log_degeneracy(const std::vector<std::size_t>& k) {
  double n = 0.0;
  for (std::size_t v : k) n += static_cast<double>(v);
  detail::require(n >= 1.0, "log_degeneracy: need at least one particle");
  LogDegeneracy out;
  out.exact = std::lgamma(n + 1.0);
  for (std::size_t v : k) {
    const double kv = static_cast<double>(v);
    out.exact -= std::lgamma(kv + 1.0);
    out.approximation -= n * xlogx(kv / n);
  }
  return out;
}

/// ¼ Σ_k |x_{k+1} − x_k|² / dt.
inline double schilder_action(const std::vector<Point>& path, double dt) {
  detail::require(dt > 0.0, "schilder_action: dt must be positive");
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    detail::require(path[k].size() == path[k + 1].size(), "schilder_action: points of different dimension");
    for (std::size_t a = 0; a < path[k].size(); ++a) {
      const double dx = path[k + 1][a] - path[k][a];
      detail::require(std::isfinite(dx), "schilder_action: path must be finite");
      s += dx * dx;
    }
  }
  return 0.25 * s / dt;
}

inline double schilder_action(const std::vector<double>& path, double dt) {
  std::vector<Point> p;
  for (double x : path) p.push_back({x});
  return schilder_action(p, dt);
}

}  // namespace gradflow
