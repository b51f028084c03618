#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "netpd/game.hpp"
#include "netpd/runner.hpp"
#include "netpd/topology.hpp"

namespace netpd {

// Per-round mean across runs with a one-standard-error band (sample sd over
// sqrt(runs)). The band entry is NaN where fewer than two runs contribute.
struct SeriesWithBand {
  std::vector<double> mean;
  std::vector<double> se;
  std::vector<std::size_t> runs;

  std::size_t size() const noexcept { return mean.size(); }
  bool has_band(std::size_t round) const;
};

// per_run[r][t] is run r's value at round t; NaN marks "no sample".
// Rounds without any sample get NaN means.
SeriesWithBand summarize_runs(const std::vector<std::vector<double>>& per_run);

// Fraction of cooperating subjects per round over completed repetitions.
// Throws InputError if none completed.
SeriesWithBand cooperation_series(const ExperimentResult& result);

// Cooperators' mean fraction of cooperating neighbors minus defectors' mean
// fraction; nullopt if either class is empty.
std::optional<double> assortment(std::span<const Action> actions, const Graph& graph);
SeriesWithBand assortment_series(const ExperimentResult& result);

// Net points minus the round's population mean, per player.
std::vector<double> relative_payoff(const RoundRecord& record);

struct ClassShares {
  std::size_t cooperator_count = 0;
  std::size_t defector_count = 0;
  double cooperator_share() const noexcept;
  double defector_share() const noexcept;
};

struct RelativePayoffs {
  SeriesWithBand cooperators;
  SeriesWithBand defectors;
  // Each player-round classified by its action that round (the default).
  ClassShares player_rounds;
  // Each player of each repetition classified by its majority action (ties
  // count as cooperation).
  ClassShares players;
  // Pooled player-round relative payoffs, for the class comparison test.
  std::vector<double> cooperator_samples;
  std::vector<double> defector_samples;
};

RelativePayoffs relative_payoffs(const ExperimentResult& result);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  // Both samples have zero variance: p is 1 for equal means, 0 otherwise.
  bool degenerate = false;
  // p fell below 1e-300; report it as "< 1e-300" rather than 0.
  bool p_underflow = false;
};

// Welch's unequal-variance two-sample t-test, two-sided. Each sample needs
// at least two values; otherwise InputError.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Theoretical class of a (b/c, k) cell: "b/c<k", "b/c=k" or "b/c>k".
const char* bc_class_label(long long bc_ratio, long long k);

}  // namespace netpd
