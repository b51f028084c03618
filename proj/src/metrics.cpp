#include "netpd/metrics.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "netpd/errors.hpp"

namespace netpd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // sample variance (n - 1)
};

Moments moments(std::span<const double> xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(xs.size() - 1);
  }
  return m;
}

std::vector<const RepetitionResult*> require_completed(const ExperimentResult& result) {
  auto done = result.completed();
  if (done.empty()) throw InputError("no completed repetitions");
  return done;
}

}  // namespace

bool SeriesWithBand::has_band(std::size_t round) const {
  return round < se.size() && !std::isnan(se[round]);
}

SeriesWithBand summarize_runs(const std::vector<std::vector<double>>& per_run) {
  if (per_run.empty()) throw InputError("no runs to summarize");
  std::size_t rounds = 0;
  for (const auto& run : per_run) rounds = std::max(rounds, run.size());
  SeriesWithBand out;
  out.mean.assign(rounds, kNaN);
  out.se.assign(rounds, kNaN);
  out.runs.assign(rounds, 0);
  std::vector<double> column;
  for (std::size_t t = 0; t < rounds; ++t) {
    column.clear();
    for (const auto& run : per_run) {
      if (t < run.size() && !std::isnan(run[t])) column.push_back(run[t]);
    }
    out.runs[t] = column.size();
    if (column.empty()) continue;
    const auto m = moments(column);
    out.mean[t] = m.mean;
    if (column.size() > 1) out.se[t] = std::sqrt(m.var / static_cast<double>(column.size()));
  }
  return out;
}

SeriesWithBand cooperation_series(const ExperimentResult& result) {
  const auto subjects = result.config.subjects();
  std::vector<std::vector<double>> per_run;
  for (const auto* rep : require_completed(result)) {
    auto& series = per_run.emplace_back();
    for (const auto& rec : rep->records) {
      std::size_t c = 0;
      for (NodeId i : subjects) c += rec.actions.at(i) == Action::Cooperate ? 1 : 0;
      series.push_back(static_cast<double>(c) / static_cast<double>(subjects.size()));
    }
  }
  return summarize_runs(per_run);
}

std::optional<double> assortment(std::span<const Action> actions, const Graph& graph) {
  if (actions.size() != graph.size()) {
    throw ConfigError("action count does not match the graph", "actions");
  }
  double sum_c = 0.0, sum_d = 0.0;
  std::size_t n_c = 0, n_d = 0;
  for (NodeId i = 0; i < graph.size(); ++i) {
    const auto nb = graph.neighbors(i);
    if (nb.empty()) continue;
    std::size_t coop = 0;
    for (NodeId j : nb) coop += actions[j] == Action::Cooperate ? 1 : 0;
    const double frac = static_cast<double>(coop) / static_cast<double>(nb.size());
    if (actions[i] == Action::Cooperate) {
      sum_c += frac;
      ++n_c;
    } else {
      sum_d += frac;
      ++n_d;
    }
  }
  if (n_c == 0 || n_d == 0) return std::nullopt;
  return sum_c / static_cast<double>(n_c) - sum_d / static_cast<double>(n_d);
}

SeriesWithBand assortment_series(const ExperimentResult& result) {
  std::vector<std::vector<double>> per_run;
  for (const auto* rep : require_completed(result)) {
    auto& series = per_run.emplace_back();
    for (std::size_t r = 0; r < rep->records.size(); ++r) {
      series.push_back(assortment(rep->records[r].actions, rep->graphs.at(r)).value_or(kNaN));
    }
  }
  return summarize_runs(per_run);
}

std::vector<double> relative_payoff(const RoundRecord& record) {
  double mean = 0.0;
  for (Points p : record.net) mean += static_cast<double>(p);
  mean /= static_cast<double>(record.net.size());
  std::vector<double> out;
  out.reserve(record.net.size());
  for (Points p : record.net) out.push_back(static_cast<double>(p) - mean);
  return out;
}

double ClassShares::cooperator_share() const noexcept {
  const auto total = cooperator_count + defector_count;
  return total == 0 ? kNaN : static_cast<double>(cooperator_count) / static_cast<double>(total);
}

double ClassShares::defector_share() const noexcept {
  const auto total = cooperator_count + defector_count;
  return total == 0 ? kNaN : static_cast<double>(defector_count) / static_cast<double>(total);
}

RelativePayoffs relative_payoffs(const ExperimentResult& result) {
  const auto subjects = result.config.subjects();
  RelativePayoffs out;
  std::vector<std::vector<double>> coop_runs, defect_runs;
  for (const auto* rep : require_completed(result)) {
    auto& cs = coop_runs.emplace_back();
    auto& ds = defect_runs.emplace_back();
    std::vector<std::size_t> coop_rounds(result.config.topology.n, 0);
    for (const auto& rec : rep->records) {
      const auto rel = relative_payoff(rec);
      double c_sum = 0.0, d_sum = 0.0;
      std::size_t c_n = 0, d_n = 0;
      for (NodeId i : subjects) {
        if (rec.actions[i] == Action::Cooperate) {
          c_sum += rel[i];
          ++c_n;
          ++coop_rounds[i];
          out.cooperator_samples.push_back(rel[i]);
        } else {
          d_sum += rel[i];
          ++d_n;
          out.defector_samples.push_back(rel[i]);
        }
      }
      out.player_rounds.cooperator_count += c_n;
      out.player_rounds.defector_count += d_n;
      cs.push_back(c_n ? c_sum / static_cast<double>(c_n) : kNaN);
      ds.push_back(d_n ? d_sum / static_cast<double>(d_n) : kNaN);
    }
    for (NodeId i : subjects) {
      if (2 * coop_rounds[i] >= rep->records.size()) {
        ++out.players.cooperator_count;
      } else {
        ++out.players.defector_count;
      }
    }
  }
  out.cooperators = summarize_runs(coop_runs);
  out.defectors = summarize_runs(defect_runs);
  return out;
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InputError("each sample needs at least two values");
  const auto ma = moments(a);
  const auto mb = moments(b);
  TTestResult r;
  const double sa = ma.var / static_cast<double>(a.size());
  const double sb = mb.var / static_cast<double>(b.size());
  const double s = sa + sb;
  if (s == 0.0) {
    r.degenerate = true;
    r.df = kNaN;
    if (ma.mean == mb.mean) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma.mean > mb.mean ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = (ma.mean - mb.mean) / std::sqrt(s);
  r.df = s * s / (sa * sa / static_cast<double>(a.size() - 1) +
                  sb * sb / static_cast<double>(b.size() - 1));
  boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(dist, -std::fabs(r.t));
  if (r.p > 1.0) r.p = 1.0;
  if (r.p < 1e-300) r.p_underflow = true;
  return r;
}

const char* bc_class_label(long long bc_ratio, long long k) {
  if (bc_ratio < k) return "b/c<k";
  if (bc_ratio == k) return "b/c=k";
  return "b/c>k";
}

}  // namespace netpd
