#include "chmm/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace chmm {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_sum_exp of an empty list");
  const double hi = *std::max_element(values.begin(), values.end());
  if (hi == kLogZero) return kLogZero;
  if (std::isinf(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

StateSpace::StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) throw std::invalid_argument("state space needs at least two states");
  if (labels_.size() > 255) throw std::invalid_argument("state space too large");
  std::set<std::string> seen(labels_.begin(), labels_.end());
  if (seen.size() != labels_.size()) throw std::invalid_argument("state labels must be unique");
}

Trajectories::Trajectories(int chains, int steps, State fill)
    : chains_(chains), steps_(steps), data_(static_cast<std::size_t>(chains) * steps, fill) {
  if (chains < 0 || steps < 0) throw DimensionError("negative trajectory dimensions");
}

void Trajectories::validate(int num_states) const {
  for (State s : data_) {
    if (s >= num_states) throw DimensionError("trajectory state out of range");
  }
}

ObservationGrid::ObservationGrid(int chains, int steps, int fill)
    : chains_(chains), steps_(steps), data_(static_cast<std::size_t>(chains) * steps, fill) {
  if (chains < 0 || steps < 0) throw DimensionError("negative observation dimensions");
}

ChainLayout::ChainLayout(std::vector<ChainInfo> chains, int num_kinds) : chains_(std::move(chains)), num_kinds_(num_kinds) {
  if (num_kinds_ < 1) throw std::invalid_argument("at least one chain kind required");
  for (const auto& c : chains_) {
    if (c.block < 0) throw std::invalid_argument("negative block index");
    if (c.kind < 0 || c.kind >= num_kinds_) throw std::invalid_argument("chain kind out of range");
    if (c.last_present < 0) throw std::invalid_argument("chain must be present at the first step");
    num_blocks_ = std::max(num_blocks_, c.block + 1);
  }
  members_.assign(num_blocks_, {});
  for (int k = 0; k < static_cast<int>(chains_.size()); ++k) members_[chains_[k].block].push_back(k);
}

SummaryStatistics::SummaryStatistics(int steps, int blocks, int kinds, int states)
    : steps_(steps), blocks_(blocks), kinds_(kinds), states_(states),
      counts_(static_cast<std::size_t>(steps) * blocks * kinds * states, 0) {}

int SummaryStatistics::present_in_block(int t, int b) const {
  auto row = block(t, b);
  return std::accumulate(row.begin(), row.end(), 0);
}

SummaryStatistics compute_summaries(const Trajectories& x, const ChainLayout& layout, int num_states) {
  if (x.chains() != layout.chains()) throw DimensionError("trajectory chain count does not match the chain layout");
  SummaryStatistics summary(x.steps(), layout.blocks(), layout.kinds(), num_states);
  for (int k = 0; k < x.chains(); ++k) {
    const auto& info = layout[k];
    for (int t = 0; t < x.steps() && layout.present(k, t); ++t) summary.add(t, info.block, info.kind, x(k, t), 1);
  }
  return summary;
}

void update_summaries(SummaryStatistics& summary, const ChainLayout& layout, int k, int t, State old_state,
                      State new_state) {
  if (!layout.present(k, t) || old_state == new_state) return;
  const auto& info = layout[k];
  summary.add(t, info.block, info.kind, old_state, -1);
  summary.add(t, info.block, info.kind, new_state, 1);
}

std::vector<double> CoupledModel::initial_log_probs(int chain) const {
  std::vector<double> row(num_states());
  initial_probs(chain, row);
  for (double& v : row) v = std::log(v);
  return row;
}

std::vector<double> CoupledModel::transition_log_row(int chain, int t, State from_state,
                                                     const SummaryStatistics& summary) const {
  const int S = num_states();
  std::vector<double> row(S, kLogZero);
  if (layout().frozen_after(chain, t)) {
    row[from_state] = 0.0;
    return row;
  }
  const auto& info = layout()[chain];
  std::vector<double> prob(S * S), logp(S * S);
  transition(info.block, info.kind, t, summary.block(t, info.block), prob, logp);
  std::copy(logp.begin() + from_state * S, logp.begin() + (from_state + 1) * S, row.begin());
  return row;
}

EmissionTable::EmissionTable(const CoupledModel& model, const ObservationGrid& y)
    : steps_(y.steps()), states_(model.num_states()) {
  if (y.chains() != model.chains() || y.steps() != model.steps())
    throw DimensionError("observation grid does not match the model dimensions");
  values_.resize(static_cast<std::size_t>(y.chains()) * steps_ * states_);
  std::size_t i = 0;
  for (int k = 0; k < y.chains(); ++k)
    for (int t = 0; t < steps_; ++t)
      for (int s = 0; s < states_; ++s) values_[i++] = std::exp(model.emission_log_prob(k, t, y(k, t), s));
}

double log_complete_density(const Trajectories& x, const ObservationGrid& y, const CoupledModel& model) {
  const auto& layout = model.layout();
  if (x.chains() != y.chains() || x.steps() != y.steps())
    throw DimensionError("trajectories and observations differ in shape");
  if (x.chains() != layout.chains() || x.steps() != model.steps())
    throw DimensionError("trajectories do not match the model dimensions");
  const int S = model.num_states();
  x.validate(S);
  const auto summary = compute_summaries(x, layout, S);

  std::vector<double> init(S), prob(S * S);
  double total = 0.0;
  for (int k = 0; k < x.chains(); ++k) {
    model.initial_probs(k, init);
    total += std::log(init[x(k, 0)]);
    for (int t = 0; t < x.steps(); ++t) {
      total += model.emission_log_prob(k, t, y(k, t), x(k, t));
    }
    if (total == kLogZero) return kLogZero;
  }
  for (int k = 0; k < x.chains(); ++k) {
    const auto& info = layout[k];
    for (int t = 0; t + 1 < x.steps(); ++t) {
      if (layout.frozen_after(k, t)) {
        if (x(k, t + 1) != x(k, t)) return kLogZero;
        continue;
      }
      model.transition(info.block, info.kind, t, summary.block(t, info.block), prob, {});
      const double p = prob[x(k, t) * S + x(k, t + 1)];
      if (p <= 0.0) return kLogZero;
      total += std::log(p);
    }
  }
  return total;
}

}  // namespace chmm
