// Copyright 2026 The qd-deplete Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "qdd/level_model.hpp"

namespace qdd {
namespace {

const Transition* find_transition(const LevelGraph& g, std::string_view from,
                                  std::string_view to) {
  for (const auto& tr : g.transitions())
    if (tr.from == g.index(from) && tr.to == g.index(to)) return &tr;
  return nullptr;
}

bool mentions(const ValidationReport& r, std::string_view needle) {
  for (const auto& v : r.violations)
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

// Probability of absorption into Empty from every level under zero drive,
// from the fundamental matrix of the chain restricted to non-Empty levels.
Eigen::VectorXd absorption_into_empty(const LevelGraph& g) {
  const auto m = rate_matrix(g);
  const auto e = static_cast<Eigen::Index>(g.index(level::kEmpty));
  const Eigen::Index n = m.rows();
  std::vector<Eigen::Index> transient;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != e) transient.push_back(i);
  const auto k = static_cast<Eigen::Index>(transient.size());
  Eigen::MatrixXd q(k, k);
  Eigen::VectorXd into(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    into(a) = m(e, transient[a]);
    for (Eigen::Index b = 0; b < k; ++b) q(b, a) = m(transient[b], transient[a]);
  }
  // Row vector h solves h Q = -into^T.
  return q.transpose().colPivHouseholderQr().solve(-into);
}

TEST(BuildDefaultModel, LevelsAndRates) {
  const auto g = build_default_model();
  EXPECT_EQ(g.size(), 6u);
  for (auto l : {level::kEmpty, level::kBright, level::kDark, level::kBiexcitonExcited,
                 level::kBiexcitonGround, level::kBiexcitonBlockaded})
    EXPECT_TRUE(g.find(l).has_value()) << l;
  // Six spontaneous transitions plus the driven DE -> XX_excited channel.
  std::size_t spontaneous = 0;
  for (const auto& tr : g.transitions()) spontaneous += tr.kind != TransitionKind::Driven;
  EXPECT_EQ(spontaneous, 6u);
  EXPECT_EQ(g.transitions().size(), 7u);

  const auto* x0 = find_transition(g, level::kBright, level::kEmpty);
  ASSERT_NE(x0, nullptr);
  EXPECT_EQ(x0->kind, TransitionKind::Radiative);
  EXPECT_EQ(x0->label, "X0");
  EXPECT_NEAR(x0->effective_rate(), 2.128, 1e-3);
  EXPECT_DOUBLE_EQ(x0->effective_rate(), 1.0 / 0.470);

  const auto* drive = find_transition(g, level::kDark, level::kBiexcitonExcited);
  ASSERT_NE(drive, nullptr);
  EXPECT_EQ(drive->kind, TransitionKind::Driven);
  EXPECT_EQ(drive->label, kDepleteChannel);

  EXPECT_EQ(find_transition(g, level::kBiexcitonGround, level::kBright)->label, "XX0");
  EXPECT_EQ(find_transition(g, level::kBiexcitonBlockaded, level::kDark)->label, "XX0_T3");
  EXPECT_DOUBLE_EQ(find_transition(g, level::kDark, level::kEmpty)->effective_rate(), 1e-3);
}

TEST(BuildDefaultModel, ZeroBranchLeavesSingleRelaxation) {
  ModelParams p;
  p.branch_b = 0.0;
  const auto g = build_default_model(p);
  EXPECT_EQ(find_transition(g, level::kBiexcitonExcited, level::kBiexcitonBlockaded), nullptr);
  const auto* only = find_transition(g, level::kBiexcitonExcited, level::kBiexcitonGround);
  ASSERT_NE(only, nullptr);
  EXPECT_DOUBLE_EQ(only->branch_weight, 1.0);
  EXPECT_TRUE(validate(g).ok());
}

TEST(BuildDefaultModel, HalfBranchEffectiveRates) {
  const auto g = build_default_model();
  const double expected = 0.5 * (1.0 / 0.03);
  EXPECT_NEAR(expected, 16.6667, 1e-4);
  EXPECT_NEAR(find_transition(g, level::kBiexcitonExcited, level::kBiexcitonGround)
                  ->effective_rate(),
              expected, 1e-12);
  EXPECT_NEAR(find_transition(g, level::kBiexcitonExcited, level::kBiexcitonBlockaded)
                  ->effective_rate(),
              expected, 1e-12);
}

TEST(BuildDefaultModel, RejectsInvalidParams) {
  ModelParams p;
  p.branch_b = 1.5;
  try {
    build_default_model(p);
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "branch_b must lie in [0,1]");
  }
  p = {};
  p.tau_de = 0.0;
  try {
    build_default_model(p);
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("tau_de_ns"), std::string::npos);
  }
  p = {};
  p.tau_relax = -1.0;
  EXPECT_THROW(build_default_model(p), std::invalid_argument);
}

TEST(Validate, DefaultGraphPasses) {
  const auto r = validate(build_default_model());
  EXPECT_TRUE(r.ok()) << (r.violations.empty() ? "" : r.violations.front());
}

TEST(Validate, BranchSumViolationNamesLevel) {
  const auto base = build_default_model();
  auto relax = [&](const Transition& tr) { return tr.from == base.index(level::kBiexcitonExcited); };
  const double rate = 1.0 / base.params().tau_relax;
  const auto g = base.without(relax)
                     .with_transition({base.index(level::kBiexcitonExcited),
                                       base.index(level::kBiexcitonGround),
                                       TransitionKind::NonRadiative, "", rate, 0.6})
                     .with_transition({base.index(level::kBiexcitonExcited),
                                       base.index(level::kBiexcitonBlockaded),
                                       TransitionKind::NonRadiative, "", rate, 0.6});
  const auto r = validate(g);
  ASSERT_FALSE(r.ok());
  EXPECT_TRUE(mentions(r, "XX_excited branch-sum")) << r.violations.front();
}

TEST(Validate, MissingDarkDecayIsNotAbsorbing) {
  const auto base = build_default_model();
  const auto g = base.without([&](const Transition& tr) {
    return tr.from == base.index(level::kDark) && tr.to == base.index(level::kEmpty);
  });
  const auto r = validate(g);
  ASSERT_FALSE(r.ok());
  EXPECT_TRUE(mentions(r, "DE cannot reach Empty without drive"));

  // Independent check by graph search over nonzero off-diagonal generator entries.
  const auto m = rate_matrix(g);
  std::vector<bool> seen(g.size(), false);
  std::vector<LevelIndex> stack{g.index(level::kDark)};
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    if (seen[i]) continue;
    seen[i] = true;
    for (LevelIndex j = 0; j < g.size(); ++j)
      if (j != i && m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) > 0.0)
        stack.push_back(j);
  }
  EXPECT_FALSE(seen[g.index(level::kEmpty)]);
}

TEST(Validate, StructuralViolations) {
  const auto base = build_default_model();
  EXPECT_TRUE(mentions(validate(base.with_transition({0, 17, TransitionKind::NonRadiative, "",
                                                      1.0, 1.0})),
                       "undeclared"));
  EXPECT_TRUE(mentions(validate(base.with_transition({1, 0, TransitionKind::Radiative, "X0",
                                                      -1.0, 1.0})),
                       "negative rate"));
  EXPECT_TRUE(mentions(validate(base.with_transition({1, 0, TransitionKind::Radiative, "", 1.0,
                                                      1.0})),
                       "no line label"));
  LevelGraph dup({"Empty", "BE", "DE", "DE"}, {}, {});
  EXPECT_TRUE(mentions(validate(dup), "duplicate"));
  LevelGraph missing({"Empty", "BE"}, {}, {});
  EXPECT_TRUE(mentions(validate(missing), "missing required level 'DE'"));
}

TEST(RateMatrix, ZeroDriveBrightColumn) {
  const auto g = build_default_model();
  const auto m = rate_matrix(g);
  const auto be = static_cast<Eigen::Index>(g.index(level::kBright));
  const auto empty = static_cast<Eigen::Index>(g.index(level::kEmpty));
  EXPECT_DOUBLE_EQ(m(be, be), -1.0 / 0.470);
  EXPECT_DOUBLE_EQ(m(empty, be), 1.0 / 0.470);
}

TEST(RateMatrix, DrivenDarkColumn) {
  const auto g = build_default_model();
  const auto m = rate_matrix(g, {{"deplete", 1.0}});
  const auto de = static_cast<Eigen::Index>(g.index(level::kDark));
  EXPECT_NEAR(m(de, de), -(1.0 + 1.0 / 1000.0), 1e-15);
  EXPECT_DOUBLE_EQ(m(static_cast<Eigen::Index>(g.index(level::kBiexcitonExcited)), de), 1.0);
}

TEST(RateMatrix, Errors) {
  const auto g = build_default_model();
  EXPECT_THROW(rate_matrix(g, {{"nope", 1.0}}), std::invalid_argument);
  EXPECT_THROW(rate_matrix(g, {{"deplete", -1.0}}), std::invalid_argument);
}

TEST(RateMatrixProperty, GeneratorColumnsAndPositivity) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> tau(0.001, 2000.0), unit(0.0, 1.0), drive(0.0, 50.0);
  for (int trial = 0; trial < 500; ++trial) {
    ModelParams p{tau(rng), tau(rng), tau(rng), tau(rng), tau(rng), unit(rng)};
    if (trial % 10 == 0) p.branch_b = trial % 20 == 0 ? 0.0 : 1.0;
    const auto g = build_default_model(p);
    ASSERT_TRUE(validate(g).ok());
    const auto m = rate_matrix(g, {{"deplete", drive(rng)}});
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      EXPECT_NEAR(m.col(c).sum(), 0.0, 1e-12 * std::max(1.0, m.col(c).cwiseAbs().maxCoeff()));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        if (r != c) {
          EXPECT_GE(m(r, c), 0.0);
        }
    }
    // Branch-weight closure.
    double sum = 0.0;
    for (const auto& tr : g.transitions())
      if (tr.from == g.index(level::kBiexcitonExcited)) sum += tr.branch_weight;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(RateMatrixProperty, EveryLevelAbsorbsIntoEmpty) {
  for (double b : {0.0, 0.5, 1.0}) {
    ModelParams p;
    p.branch_b = b;
    const auto h = absorption_into_empty(build_default_model(p));
    for (Eigen::Index i = 0; i < h.size(); ++i) EXPECT_NEAR(h(i), 1.0, 1e-9) << "b=" << b;
  }
}

}  // namespace
}  // namespace qdd
