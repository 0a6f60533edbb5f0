#ifndef CHMM_TESTS_SIR_FIXTURES_HPP
#define CHMM_TESTS_SIR_FIXTURES_HPP

#include <string>
#include <vector>

#include "chmm/io.hpp"
#include "chmm/simulate.hpp"

namespace chmm::testing {

/// Builds SIR data from compact rows "id,pen,transgenic,challenge,SYMBOLS",
/// one symbol per half-day step.
inline sir::SirData sir_data(const std::vector<std::string>& rows) {
  const auto first = rows.front();
  const std::size_t steps = first.size() - first.rfind(',') - 1;
  std::string csv = "chicken,pen,transgenic,challenge";
  for (std::size_t t = 1; t <= steps; ++t) csv += ",t" + std::to_string(t);
  csv += "\n";
  for (const auto& row : rows) {
    const auto cut = row.rfind(',');
    csv += row.substr(0, cut);
    for (char c : row.substr(cut + 1)) csv += std::string(",") + c;
    csv += "\n";
  }
  return io::parse_data_csv(csv);
}

/// Two birds in one pen over six half-day steps: the challenge bird dies and
/// the in-contact bird survives.
inline sir::SirData two_bird_pen() { return sir_data({"C,1,0,1,AAAAD.", "K,1,0,0,AAAAAA"}); }

inline sir::SirData simulated(const char* preset, std::uint64_t seed, int model = 16,
                              sir::SirParams params = sir::reference_params()) {
  const auto v = sir::ModelVariant::from_index(model);
  return sir::simulate_experiment(sir::preset_design(preset), params.tied(v), v, seed).data;
}

}  // namespace chmm::testing

#endif  // CHMM_TESTS_SIR_FIXTURES_HPP
