#include "chmm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace chmm::io {

using nlohmann::json;

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw FormatError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw FormatError("not a number: '" + s + "'");
  return v;
}

namespace {

int parse_int(const std::string& s, const char* what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw FormatError(std::string(what) + " is not an integer: '" + s + "'");
  }
  if (used != s.size()) throw FormatError(std::string(what) + " is not an integer: '" + s + "'");
  return v;
}

bool parse_flag(const std::string& s, const char* what) {
  if (s == "1" || s == "true" || s == "TRUE") return true;
  if (s == "0" || s == "false" || s == "FALSE") return false;
  throw FormatError(std::string(what) + " must be 0 or 1, got '" + s + "'");
}

/// Checks the `t1..tT` time header starting at column `first`; returns T.
int check_time_header(const std::vector<std::string>& header, std::size_t first) {
  const int T = static_cast<int>(header.size() - first);
  if (T < 1) throw FormatError("no time columns in header");
  for (int t = 0; t < T; ++t) {
    if (header[first + t] != "t" + std::to_string(t + 1))
      throw FormatError("expected column t" + std::to_string(t + 1) + ", got '" + header[first + t] + "'");
  }
  return T;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::string format_data_csv(const sir::SirData& data) {
  std::string out = "chicken,pen,transgenic,challenge";
  for (int t = 0; t < data.steps(); ++t) out += ",t" + std::to_string(t + 1);
  out += "\n";
  for (int k = 0; k < data.chickens_count(); ++k) {
    const auto& c = data.chickens[k];
    out += data.ids[k] + "," + std::to_string(c.pen) + "," + (c.transgenic ? "1" : "0") + "," +
           (c.challenge ? "1" : "0");
    for (int t = 0; t < data.steps(); ++t) {
      static constexpr char kSymbols[] = {'A', 'D', 'M'};
      const int y = data.observations(k, t);
      out += ',';
      out += y == kMissing ? '.' : kSymbols[y];
    }
    out += "\n";
  }
  return out;
}

sir::SirData parse_data_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw FormatError("data CSV is empty");
  const auto& header = rows.front();
  if (header.size() < 5 || header[0] != "chicken" || header[1] != "pen" || header[2] != "transgenic" ||
      header[3] != "challenge")
    throw FormatError("data CSV header must start with chicken,pen,transgenic,challenge");
  const int T = check_time_header(header, 4);
  const int K = static_cast<int>(rows.size()) - 1;
  if (K < 1) throw FormatError("data CSV has no chickens");

  sir::SirData data;
  data.observations = ObservationGrid(K, T);
  std::map<int, int> pen_counts;
  for (int k = 0; k < K; ++k) {
    const auto& row = rows[k + 1];
    if (row.size() != header.size())
      throw FormatError("row " + std::to_string(k + 2) + " has " + std::to_string(row.size()) + " fields, expected " +
                        std::to_string(header.size()));
    data.ids.push_back(row[0]);
    sir::ChickenMeta c;
    c.pen = parse_int(row[1], "pen");
    c.transgenic = parse_flag(row[2], "transgenic");
    c.challenge = parse_flag(row[3], "challenge");
    for (int t = 0; t < T; ++t) {
      const auto& cell = row[4 + t];
      int y;
      if (cell == "A") {
        y = sir::kAlive;
      } else if (cell == "D") {
        y = sir::kDead;
      } else if (cell == "M") {
        y = sir::kMoribundRemoved;
      } else if (cell == "." || cell.empty()) {
        y = kMissing;
      } else {
        throw FormatError("unknown symbol '" + cell + "' for chicken " + row[0]);
      }
      data.observations.set(k, t, y);
    }
    c.last_present = sir::derive_last_present(data.observations, k);
    c.implied_removal = sir::derive_implied_removal(data.observations, k);
    ++pen_counts[c.pen];
    data.chickens.push_back(c);
  }
  for (auto& c : data.chickens) c.pen_size = pen_counts[c.pen];
  data.validate();
  return data;
}

std::string format_trajectories_csv(const Trajectories& x, const StateSpace& states,
                                    const std::vector<std::string>& ids) {
  if (!ids.empty() && static_cast<int>(ids.size()) != x.chains()) throw DimensionError("id count does not match chains");
  std::string out = "chain";
  for (int t = 0; t < x.steps(); ++t) out += ",t" + std::to_string(t + 1);
  out += "\n";
  for (int k = 0; k < x.chains(); ++k) {
    out += ids.empty() ? std::to_string(k) : ids[k];
    for (int t = 0; t < x.steps(); ++t) out += "," + states.label(x(k, t));
    out += "\n";
  }
  return out;
}

Trajectories parse_trajectories_csv(const std::string& text, const StateSpace& states) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows.front().empty() || rows.front()[0] != "chain")
    throw FormatError("trajectory CSV header must start with chain");
  const int T = check_time_header(rows.front(), 1);
  const int K = static_cast<int>(rows.size()) - 1;
  Trajectories x(K, T);
  for (int k = 0; k < K; ++k) {
    const auto& row = rows[k + 1];
    if (static_cast<int>(row.size()) != T + 1) throw FormatError("ragged trajectory row " + std::to_string(k + 2));
    for (int t = 0; t < T; ++t) {
      const auto& labels = states.labels();
      const auto it = std::find(labels.begin(), labels.end(), row[t + 1]);
      if (it == labels.end()) throw FormatError("unknown state label '" + row[t + 1] + "'");
      x.set(k, t, static_cast<State>(it - labels.begin()));
    }
  }
  return x;
}

json trajectories_to_json(const Trajectories& x, const StateSpace& states) {
  json rows = json::array();
  for (int k = 0; k < x.chains(); ++k) {
    json row = json::array();
    for (int t = 0; t < x.steps(); ++t) row.push_back(static_cast<int>(x(k, t)));
    rows.push_back(std::move(row));
  }
  return {{"K", x.chains()}, {"T", x.steps()}, {"S", states.size()}, {"labels", states.labels()}, {"states", rows}};
}

Trajectories trajectories_from_json(const json& j, const StateSpace& states) {
  const int K = j.at("K").get<int>();
  const int T = j.at("T").get<int>();
  if (j.at("S").get<int>() != states.size() || j.at("labels").get<std::vector<std::string>>() != states.labels())
    throw FormatError("trajectory state space does not match the model");
  const auto& rows = j.at("states");
  if (!rows.is_array() || static_cast<int>(rows.size()) != K) throw FormatError("trajectory JSON has wrong row count");
  Trajectories x(K, T);
  for (int k = 0; k < K; ++k) {
    if (static_cast<int>(rows[k].size()) != T) throw FormatError("trajectory JSON row has wrong length");
    for (int t = 0; t < T; ++t) x.set(k, t, static_cast<State>(rows[k][t].get<int>()));
  }
  x.validate(states.size());
  return x;
}

json observations_to_json(const ObservationGrid& y) {
  json rows = json::array();
  for (int k = 0; k < y.chains(); ++k) {
    json row = json::array();
    for (int t = 0; t < y.steps(); ++t) row.push_back(y.missing(k, t) ? json(nullptr) : json(y(k, t)));
    rows.push_back(std::move(row));
  }
  return {{"K", y.chains()}, {"T", y.steps()}, {"symbols", rows}};
}

ObservationGrid observations_from_json(const json& j) {
  const int K = j.at("K").get<int>();
  const int T = j.at("T").get<int>();
  const auto& rows = j.at("symbols");
  if (!rows.is_array() || static_cast<int>(rows.size()) != K) throw FormatError("observation JSON has wrong row count");
  ObservationGrid y(K, T);
  for (int k = 0; k < K; ++k) {
    if (static_cast<int>(rows[k].size()) != T) throw FormatError("observation JSON row has wrong length");
    for (int t = 0; t < T; ++t) y.set(k, t, rows[k][t].is_null() ? kMissing : rows[k][t].get<int>());
  }
  return y;
}

json params_to_json(const sir::SirParams& p, int model) {
  return {{"model", model},     {"p_N", p.p_N},         {"p_T", p.p_T},         {"nu_N", p.nu_N},
          {"beta_N", p.beta_N}, {"beta_T", p.beta_T},   {"gamma_N", p.gamma_N}, {"gamma_T", p.gamma_T}};
}

sir::SirParams params_from_json(const json& j, int model) {
  sir::SirParams p;
  auto read = [&](const char* shared, const char* name, double& value) {
    if (j.contains(shared)) value = j.at(shared).get<double>();
    if (j.contains(name)) value = j.at(name).get<double>();
  };
  read("p", "p_N", p.p_N);
  p.p_T = p.p_N;
  read("p", "p_T", p.p_T);
  read("beta", "beta_N", p.beta_N);
  p.beta_T = p.beta_N;
  read("beta", "beta_T", p.beta_T);
  read("nu", "nu_N", p.nu_N);
  read("gamma", "gamma_N", p.gamma_N);
  p.gamma_T = p.gamma_N;
  read("gamma", "gamma_T", p.gamma_T);
  const auto variant = sir::ModelVariant::from_index(model);
  p = p.tied(variant);
  if (sir::prior_log_density(p, variant) == kLogZero)
    throw std::invalid_argument("parameters lie outside the prior support");
  return p;
}

json mixture_to_json(const DefenseMixture& mixture, const std::vector<std::string>& names) {
  const int d = mixture.dimension();
  json mean = json::array();
  json cov = json::array();
  for (int i = 0; i < d; ++i) {
    mean.push_back(mixture.mean()[i]);
    json row = json::array();
    for (int c = 0; c < d; ++c) row.push_back(mixture.covariance()(i, c));
    cov.push_back(std::move(row));
  }
  return {{"lambda", mixture.lambda()}, {"t_df", mixture.t_df()}, {"names", names}, {"mean", mean}, {"cov", cov}};
}

DefenseMixture mixture_from_json(const json& j) {
  const auto mean_v = j.at("mean").get<std::vector<double>>();
  const auto cov_v = j.at("cov").get<std::vector<std::vector<double>>>();
  const int d = static_cast<int>(mean_v.size());
  if (static_cast<int>(cov_v.size()) != d) throw FormatError("mixture covariance has the wrong size");
  Eigen::VectorXd mean(d);
  Eigen::MatrixXd cov(d, d);
  for (int i = 0; i < d; ++i) {
    mean[i] = mean_v[i];
    if (static_cast<int>(cov_v[i].size()) != d) throw FormatError("mixture covariance has the wrong size");
    for (int c = 0; c < d; ++c) cov(i, c) = cov_v[i][c];
  }
  return DefenseMixture(mean, cov, j.at("lambda").get<double>(), j.value("t_df", 0.0));
}

std::string format_evidence_csv(const std::vector<EvidenceEstimate>& estimates, const std::string& category) {
  std::string out = "model,log_ml,se_log,lo3,hi3,category\n";
  for (const auto& e : estimates) {
    out += std::to_string(e.model) + "," + format_real(e.log_ml) + "," + format_real(e.se_log) + "," +
           format_real(e.lo3) + "," + format_real(e.hi3) + "," + category + "\n";
  }
  return out;
}

std::string format_ranking_csv(const std::vector<RankingRow>& rows) {
  std::string out = "model,log_ml,se_log,lo3,hi3,category\n";
  for (const auto& r : rows) {
    if (!r.present) {
      out += std::to_string(r.model) + ",nan,nan,nan,nan," + category_name(r.category) + "\n";
      continue;
    }
    out += std::to_string(r.model) + "," + format_real(r.log_ml) + "," + format_real(r.se_log) + "," +
           format_real(r.lo3) + "," + format_real(r.hi3) + "," + category_name(r.category) + "\n";
  }
  return out;
}

std::vector<EvidenceEstimate> parse_evidence_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  const std::vector<std::string> header = {"model", "log_ml", "se_log", "lo3", "hi3", "category"};
  if (rows.empty() || rows.front() != header) throw FormatError("evidence CSV header must be model,log_ml,se_log,lo3,hi3,category");
  std::vector<EvidenceEstimate> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != header.size()) throw FormatError("evidence row " + std::to_string(i + 1) + " is ragged");
    if (row[5] == "missing") continue;
    EvidenceEstimate e;
    e.model = parse_int(row[0], "model");
    e.log_ml = parse_real(row[1]);
    e.se_log = parse_real(row[2]);
    e.lo3 = parse_real(row[3]);
    e.hi3 = parse_real(row[4]);
    out.push_back(std::move(e));
  }
  return out;
}

std::string format_theta_csv(const std::vector<std::vector<double>>& theta, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) out += (i ? "," : "") + names[i];
  out += "\n";
  for (const auto& row : theta) {
    if (row.size() != names.size()) throw DimensionError("parameter sample has the wrong length");
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_real(row[i]);
    out += "\n";
  }
  return out;
}

std::string format_smooth_csv(const std::vector<std::string>& ids,
                              const std::vector<std::vector<std::vector<double>>>& marginals) {
  if (ids.size() != marginals.size()) throw DimensionError("id count does not match the marginals");
  std::string out = "chicken,t,day,p_S,p_I,p_R\n";
  for (std::size_t k = 0; k < ids.size(); ++k) {
    for (std::size_t t = 0; t < marginals[k].size(); ++t) {
      const auto& m = marginals[k][t];
      if (m.size() != 3) throw DimensionError("smoothing rows need three states");
      out += ids[k] + "," + std::to_string(t + 1) + "," + format_real(0.5 * static_cast<double>(t)) + "," +
             format_real(m[0]) + "," + format_real(m[1]) + "," + format_real(m[2]) + "\n";
    }
  }
  return out;
}

}  // namespace chmm::io
