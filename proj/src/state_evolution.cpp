#include "blaircomp/state_evolution.hpp"

#include <algorithm>
#include <cmath>

#include "blaircomp/errors.hpp"

namespace blaircomp {

namespace {

constexpr double kTiny = 1e-14;

double energy(double alpha, double beta) { return alpha * alpha + beta * beta; }

void check_energy(const SENode& n) {
  if (!(energy(n.alpha_h, n.beta_h) > 0.0) || !(energy(n.alpha_x, n.beta_x) > 0.0))
    throw DegenerateError("state evolution needs nonzero alpha^2 + beta^2");
}

}  // namespace

SEState population_se_step(const SEState& state) {
  const std::vector<Perturbation> none(state.nodes.size());
  return approximate_se_step(state, none);
}

SEState approximate_se_step(const SEState& state, std::span<const Perturbation> perturbations) {
  if (perturbations.size() != state.nodes.size())
    throw DimensionError("need one perturbation set per node");
  const double eta = state.eta;
  SEState next = state;
  for (std::size_t i = 0; i < state.nodes.size(); ++i) {
    const SENode& n = state.nodes[i];
    const Perturbation& p = perturbations[i];
    check_energy(n);
    const double dh = energy(n.alpha_h, n.beta_h);
    const double dx = energy(n.alpha_x, n.beta_x);
    SENode& o = next.nodes[i];
    o.alpha_h = (1.0 - eta + eta * n.q * p.psi_h / dx) * n.alpha_h +
                eta * (1.0 - p.rho_h) * n.q * n.q * n.alpha_x / dx;
    o.beta_h = (1.0 - eta + eta * n.q * p.phi_h / dx) * n.beta_h;
    o.alpha_x = (1.0 - eta + eta * n.q * p.psi_x / dh) * n.alpha_x +
                eta * (1.0 - p.rho_x) * n.q * n.q * n.alpha_h / dh;
    o.beta_x = (1.0 - eta + eta * n.q * p.phi_x / dh) * n.beta_x;
  }
  return next;
}

StateTrace population_trace(const SEState& start, std::size_t steps) {
  StateTrace trace;
  SEState st = start;
  for (std::size_t t = 0; t <= steps; ++t) {
    TraceRecord rec;
    rec.t = t;
    for (const auto& n : st.nodes) {
      NodeComponents c;
      c.alpha_h = n.alpha_h;
      c.beta_h = n.beta_h;
      c.alpha_x = n.alpha_x;
      c.beta_x = n.beta_x;
      c.rmse_x = n.beta_x / std::sqrt(energy(n.alpha_x, n.beta_x));
      rec.components.push_back(c);
    }
    trace.records.push_back(std::move(rec));
    if (t < steps) st = population_se_step(st);
  }
  trace.iterations = steps;
  return trace;
}

PerturbationSeries extract_perturbations(const StateTrace& trace, std::span<const double> q,
                                         double eta) {
  if (!(eta > 0.0)) throw ParameterError("step size must be positive");
  PerturbationSeries out;
  for (std::size_t k = 0; k + 1 < trace.records.size(); ++k) {
    const auto& cur = trace.records[k];
    const auto& nxt = trace.records[k + 1];
    if (nxt.t != cur.t + 1) continue;
    if (cur.components.size() != q.size() || nxt.components.size() != q.size())
      throw DimensionError("trace node count does not match q");

    std::vector<PerturbationEntry> row(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      const NodeComponents& a = cur.components[i];
      const NodeComponents& b = nxt.components[i];
      const double dh = std::norm(a.alpha_h) + a.beta_h * a.beta_h;
      const double dx = std::norm(a.alpha_x) + a.beta_x * a.beta_x;
      const double qi = q[i];
      PerturbationEntry& e = row[i];

      e.delta_h = b.alpha_h - ((1.0 - eta) * a.alpha_h + eta * qi * qi * a.alpha_x / dx);
      e.delta_x = b.alpha_x - ((1.0 - eta) * a.alpha_x + eta * qi * qi * a.alpha_h / dh);
      e.rho_h = 0.0;
      e.rho_x = 0.0;
      if (dx > kTiny && a.beta_h > kTiny)
        e.phi_h = (b.beta_h / a.beta_h - (1.0 - eta)) * dx / (eta * qi);
      if (dh > kTiny && a.beta_x > kTiny)
        e.phi_x = (b.beta_x / a.beta_x - (1.0 - eta)) * dh / (eta * qi);
      if (dx > kTiny && std::abs(a.alpha_h) > kTiny)
        e.psi_h = (e.delta_h / a.alpha_h).real() * dx / (eta * qi);
      if (dh > kTiny && std::abs(a.alpha_x) > kTiny)
        e.psi_x = (e.delta_x / a.alpha_x).real() * dh / (eta * qi);
    }
    out.t.push_back(cur.t);
    out.values.push_back(std::move(row));
  }
  return out;
}

std::optional<double> fit_slope(std::span<const double> ts, std::span<const double> ys) {
  if (ts.size() != ys.size() || ts.size() < 2) return std::nullopt;
  const double n = double(ts.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    mt += ts[k];
    my += ys[k];
  }
  mt /= n;
  my /= n;
  double sty = 0.0, stt = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    sty += (ts[k] - mt) * (ys[k] - my);
    stt += (ts[k] - mt) * (ts[k] - mt);
  }
  if (stt == 0.0) return std::nullopt;
  return sty / stt;
}

StageReport detect_stages(const StateTrace& trace, std::span<const double> q, std::size_t m,
                          const StageThresholds& thresholds) {
  if (q.empty()) throw DimensionError("need at least one node");
  if (m < 2) throw ParameterError("stage thresholds need m >= 2");
  const auto [qmin, qmax] = std::minmax_element(q.begin(), q.end());
  const double kappa = *qmax / *qmin;
  const double s = double(q.size());
  const double band = thresholds.gamma / (2.0 * kappa * std::sqrt(s));
  const double t1_level = thresholds.t1 / std::pow(std::log(double(m)), 5);

  StageReport rep;
  rep.thresholds = thresholds;
  for (const auto& rec : trace.records) {
    if (rec.components.size() != q.size()) throw DimensionError("trace node count does not match q");
    bool in_band = true;
    double min_h = INFINITY, min_x = INFINITY;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const auto& c = rec.components[i];
      const double ah = std::abs(c.alpha_h), ax = std::abs(c.alpha_x);
      in_band = in_band && std::abs(ah - q[i]) <= band && c.beta_h <= band &&
                std::abs(ax - q[i]) <= band && c.beta_x <= band;
      min_h = std::min(min_h, ah / q[i]);
      min_x = std::min(min_x, ax / q[i]);
    }
    if (!rep.t_gamma && in_band) rep.t_gamma = rec.t;
    if (!rep.t1 && min_h >= t1_level && min_x >= t1_level) rep.t1 = rec.t;
    if (!rep.t2 && min_h > thresholds.t2 && min_x > thresholds.t2) rep.t2 = rec.t;
  }

  const std::size_t horizon = rep.t_gamma.value_or(trace.records.empty() ? 0 : trace.records.back().t);
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<double> th, yh, tx, yx;
    for (const auto& rec : trace.records) {
      if (rec.t > horizon) break;
      const auto& c = rec.components[i];
      if (c.beta_h > 0.0 && std::abs(c.alpha_h) > 0.0) {
        th.push_back(double(rec.t));
        yh.push_back(std::log(std::abs(c.alpha_h) / c.beta_h));
      }
      if (c.beta_x > 0.0 && std::abs(c.alpha_x) > 0.0) {
        tx.push_back(double(rec.t));
        yx.push_back(std::log(std::abs(c.alpha_x) / c.beta_x));
      }
    }
    rep.growth_h.push_back(fit_slope(th, yh));
    rep.growth_x.push_back(fit_slope(tx, yx));
  }
  return rep;
}

}  // namespace blaircomp
