#ifndef CHMM_IO_HPP
#define CHMM_IO_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "chmm/core.hpp"
#include "chmm/evidence.hpp"
#include "chmm/mcmc.hpp"
#include "chmm/sir.hpp"

/// File formats shared by the CLI and the plotting scripts. Reals are written
/// with %.17g so they round-trip exactly; non-finite values appear as inf,
/// -inf or nan in CSV and as null in JSON.
namespace chmm::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_real(double v);
double parse_real(const std::string& s);

/// Writes through a sibling temporary file and renames it into place, so a
/// failed run never leaves a truncated file at `path`.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Splits CSV text into rows of fields. No quoting: fields never contain commas.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// Data CSV: `chicken,pen,transgenic,challenge,t1..tT`, symbols A/D/M/. per
/// half-day step. Pen sizes and presence are derived from the rows.
std::string format_data_csv(const sir::SirData& data);
sir::SirData parse_data_csv(const std::string& text);

/// Trajectory CSV: `chain,t1..tT` with state labels in the cells.
std::string format_trajectories_csv(const Trajectories& x, const StateSpace& states,
                                    const std::vector<std::string>& ids);
Trajectories parse_trajectories_csv(const std::string& text, const StateSpace& states);

/// JSON envelope {K, T, S, labels, states}; states is a K-list of T-lists of indices.
nlohmann::json trajectories_to_json(const Trajectories& x, const StateSpace& states);
Trajectories trajectories_from_json(const nlohmann::json& j, const StateSpace& states);

/// JSON envelope {K, T, symbols}; missing cells are null.
nlohmann::json observations_to_json(const ObservationGrid& y);
ObservationGrid observations_from_json(const nlohmann::json& j);

/// Natural-unit fields p_N, p_T, nu_N, beta_N, beta_T, gamma_N, gamma_T plus "model".
nlohmann::json params_to_json(const sir::SirParams& params, int model);
/// Accepts the shared names p, beta and gamma for both types; the result is
/// tied to the variant of `model`.
sir::SirParams params_from_json(const nlohmann::json& j, int model);

nlohmann::json mixture_to_json(const DefenseMixture& mixture, const std::vector<std::string>& names);
DefenseMixture mixture_from_json(const nlohmann::json& j);

/// Evidence CSV: model,log_ml,se_log,lo3,hi3,category.
std::string format_evidence_csv(const std::vector<EvidenceEstimate>& estimates, const std::string& category);
std::string format_ranking_csv(const std::vector<RankingRow>& rows);
/// Reads either layout back into estimates (the category column is ignored).
std::vector<EvidenceEstimate> parse_evidence_csv(const std::string& text);

/// Parameter samples in natural units, one column per free parameter.
std::string format_theta_csv(const std::vector<std::vector<double>>& theta_natural,
                             const std::vector<std::string>& names);

/// Smoothing CSV: chicken,t,day,p_S,p_I,p_R with t 1-based and day = (t-1)/2.
std::string format_smooth_csv(const std::vector<std::string>& ids,
                              const std::vector<std::vector<std::vector<double>>>& marginals);

}  // namespace chmm::io

#endif  // CHMM_IO_HPP
