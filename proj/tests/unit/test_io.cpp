#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "chmm/io.hpp"
#include "support/sir_fixtures.hpp"

using namespace chmm;
namespace fs = std::filesystem;

TEST(Reals, RoundTripExactly) {
  for (double v : {0.1, -134.64, 1e-300, 6.02214076e23, 1.0 / 3.0}) EXPECT_EQ(io::parse_real(io::format_real(v)), v);
  EXPECT_EQ(io::format_real(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(io::format_real(kLogZero), "-inf");
  EXPECT_TRUE(std::isnan(io::parse_real("nan")));
  EXPECT_EQ(io::parse_real("-inf"), kLogZero);
  EXPECT_THROW(io::parse_real("1.5x"), io::FormatError);
  EXPECT_THROW(io::parse_real(""), io::FormatError);
}

TEST(DataCsv, RoundTrip) {
  const auto data = chmm::testing::simulated("hpai-cross", 8);
  const auto text = io::format_data_csv(data);
  const auto back = io::parse_data_csv(text);
  EXPECT_EQ(back.ids, data.ids);
  ASSERT_EQ(back.chickens_count(), data.chickens_count());
  for (int k = 0; k < data.chickens_count(); ++k) {
    EXPECT_EQ(back.chickens[k].pen, data.chickens[k].pen);
    EXPECT_EQ(back.chickens[k].transgenic, data.chickens[k].transgenic);
    EXPECT_EQ(back.chickens[k].challenge, data.chickens[k].challenge);
    EXPECT_EQ(back.chickens[k].last_present, data.chickens[k].last_present);
    EXPECT_EQ(back.chickens[k].pen_size, data.chickens[k].pen_size);
    EXPECT_EQ(back.chickens[k].implied_removal, data.chickens[k].implied_removal);
    for (int t = 0; t < data.steps(); ++t) EXPECT_EQ(back.observations(k, t), data.observations(k, t));
  }
  EXPECT_EQ(io::format_data_csv(back), text);
}

TEST(DataCsv, EmptyCellIsMissing) {
  const auto data = io::parse_data_csv("chicken,pen,transgenic,challenge,t1,t2,t3\nA,1,0,1,A,D,\n");
  EXPECT_EQ(data.observations(0, 2), kMissing);
  EXPECT_EQ(data.chickens[0].last_present, 1);
}

TEST(DataCsv, RejectsMalformedInput) {
  EXPECT_THROW(io::parse_data_csv(""), io::FormatError);
  EXPECT_THROW(io::parse_data_csv("bird,pen,transgenic,challenge,t1\nA,1,0,1,A\n"), io::FormatError);
  EXPECT_THROW(io::parse_data_csv("chicken,pen,transgenic,challenge,t2\nA,1,0,1,A\n"), io::FormatError);
  EXPECT_THROW(io::parse_data_csv("chicken,pen,transgenic,challenge,t1\nA,1,0,1,X\n"), io::FormatError);
  EXPECT_THROW(io::parse_data_csv("chicken,pen,transgenic,challenge,t1\nA,1,2,1,A\n"), io::FormatError);
  EXPECT_THROW(io::parse_data_csv("chicken,pen,transgenic,challenge,t1,t2\nA,1,0,1,A\n"), io::FormatError);
  EXPECT_THROW(io::parse_data_csv("chicken,pen,transgenic,challenge,t1\n"), io::FormatError);
  // A bird observed after its death is inconsistent.
  EXPECT_THROW(io::parse_data_csv("chicken,pen,transgenic,challenge,t1,t2\nA,1,0,1,D,A\n"), std::invalid_argument);
}

TEST(Trajectories, CsvAndJsonRoundTrip) {
  const auto v = sir::ModelVariant::from_index(16);
  const auto sim = sir::simulate_experiment(sir::preset_design("scaling-4"), sir::reference_params(), v, 3);
  const sir::SirModel model(sim.data.chickens, sim.data.steps(), sir::reference_params());
  const auto csv = io::format_trajectories_csv(sim.truth, model.states(), sim.data.ids);
  const auto from_csv = io::parse_trajectories_csv(csv, model.states());
  const auto from_json = io::trajectories_from_json(io::trajectories_to_json(sim.truth, model.states()), model.states());
  for (int k = 0; k < sim.truth.chains(); ++k) {
    for (int t = 0; t < sim.truth.steps(); ++t) {
      EXPECT_EQ(from_csv(k, t), sim.truth(k, t));
      EXPECT_EQ(from_json(k, t), sim.truth(k, t));
    }
  }
  const auto j = io::trajectories_to_json(sim.truth, model.states());
  EXPECT_EQ(j.at("K"), 16);
  EXPECT_EQ(j.at("T"), 20);
  EXPECT_EQ(j.at("S"), 3);
  EXPECT_THROW(io::parse_trajectories_csv("chain,t1\nP1-01,Q\n", model.states()), io::FormatError);
}

TEST(Observations, JsonRoundTripWithMissing) {
  const auto data = chmm::testing::two_bird_pen();
  const auto j = io::observations_to_json(data.observations);
  EXPECT_TRUE(j.at("symbols")[0][5].is_null());
  const auto back = io::observations_from_json(j);
  for (int k = 0; k < 2; ++k) {
    for (int t = 0; t < 6; ++t) EXPECT_EQ(back(k, t), data.observations(k, t));
  }
}

TEST(Params, JsonRoundTripAndSharedNames) {
  const auto p = sir::reference_params();
  EXPECT_EQ(io::params_from_json(io::params_to_json(p, 16), 16), p);
  const auto shared = io::params_from_json(nlohmann::json{{"p", 0.7}, {"beta", 2.0}, {"gamma", 0.4}}, 1);
  EXPECT_EQ(shared.p_T, 0.7);
  EXPECT_EQ(shared.beta_T, 2.0);
  EXPECT_EQ(shared.gamma_T, 0.4);
  EXPECT_EQ(shared.nu_N, 1.0);
  // Model 1 ties the transgenic values to the non-transgenic ones.
  const auto tied = io::params_from_json(nlohmann::json{{"p_N", 0.7}, {"p_T", 0.2}}, 1);
  EXPECT_EQ(tied.p_T, 0.7);
  EXPECT_THROW(io::params_from_json(nlohmann::json{{"p", 1.5}}, 1), std::invalid_argument);
}

TEST(Mixture, JsonRoundTrip) {
  Eigen::MatrixXd cov(2, 2);
  cov << 0.3, 0.1, 0.1, 0.2;
  const DefenseMixture m(Eigen::Vector2d(0.5, -1.0), cov, 0.9, 4.0);
  const auto back = io::mixture_from_json(io::mixture_to_json(m, {"a", "b"}));
  EXPECT_EQ(back.mean(), m.mean());
  EXPECT_EQ(back.covariance(), m.covariance());
  EXPECT_EQ(back.lambda(), 0.9);
  EXPECT_EQ(back.t_df(), 4.0);
  auto bad = io::mixture_to_json(m, {"a", "b"});
  bad["cov"] = {{1.0}};
  EXPECT_THROW(io::mixture_from_json(bad), io::FormatError);
}

TEST(EvidenceCsv, RoundTripAndMissingRows) {
  EvidenceEstimate e;
  e.model = 3;
  e.log_ml = -134.64;
  e.se_log = 0.01;
  e.lo3 = -134.7;
  e.hi3 = -134.6;
  const auto text = io::format_evidence_csv({e}, "unranked");
  EXPECT_EQ(text.substr(0, text.find('\n')), "model,log_ml,se_log,lo3,hi3,category");
  const auto back = io::parse_evidence_csv(text);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].model, 3);
  EXPECT_EQ(back[0].log_ml, -134.64);
  EXPECT_EQ(back[0].hi3, -134.6);

  const auto rows = bayes_factor_table(std::vector<EvidenceEstimate>{e}, 4);
  const auto ranking = io::format_ranking_csv(rows);
  EXPECT_NE(ranking.find("1,nan,nan,nan,nan,missing"), std::string::npos);
  EXPECT_NE(ranking.find(",best\n"), std::string::npos);
  EXPECT_EQ(io::parse_evidence_csv(ranking).size(), 1u);
  EXPECT_THROW(io::parse_evidence_csv("model,log_ml\n1,2\n"), io::FormatError);
}

TEST(SmoothCsv, LayoutAndDays) {
  const std::vector<std::vector<std::vector<double>>> m = {{{1.0, 0.0, 0.0}, {0.25, 0.5, 0.25}}};
  const auto text = io::format_smooth_csv({"C"}, m);
  const auto rows = io::parse_csv(text);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"chicken", "t", "day", "p_S", "p_I", "p_R"}));
  EXPECT_EQ(rows[2][1], "2");
  EXPECT_EQ(io::parse_real(rows[2][2]), 0.5);
  EXPECT_EQ(io::parse_real(rows[2][4]), 0.5);
}

TEST(ThetaCsv, Layout) {
  const auto text = io::format_theta_csv({{0.5, 1.0}, {0.25, 2.0}}, {"p", "beta"});
  const auto rows = io::parse_csv(text);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"p", "beta"}));
  EXPECT_EQ(rows.size(), 3u);
  EXPECT_THROW(io::format_theta_csv({{0.5}}, {"p", "beta"}), DimensionError);
}

TEST(Files, AtomicWriteCreatesDirectories) {
  const auto dir = fs::temp_directory_path() / "chmm_io_test" / "nested";
  fs::remove_all(dir.parent_path());
  const auto path = (dir / "out.txt").string();
  io::write_file_atomic(path, "hello\n");
  EXPECT_EQ(io::read_file(path), "hello\n");
  EXPECT_FALSE(fs::exists(path + ".tmp"));
  EXPECT_THROW(io::read_file((dir / "absent").string()), std::runtime_error);
  fs::remove_all(dir.parent_path());
}
