#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "dshift/aspects/divergence.hpp"
#include "dshift/aspects/embedding.hpp"
#include "dshift/aspects/greedy_match.hpp"
#include "dshift/aspects/kde.hpp"
#include "dshift/common/random.hpp"
#include "oracles.hpp"

using namespace dshift;

namespace {

std::vector<Point2> cloud(Rng& r, std::size_t n, double cx, double cy, double sd = 1.0) {
  std::vector<Point2> p(n);
  for (auto& x : p) x = {cx + sd * r.normal(), cy + sd * r.normal()};
  return p;
}

EmbeddedSet embedded(const std::string& prefix, const std::vector<Point2>& pts) {
  EmbeddedSet s{"c", {}};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", i);
    s.points.push_back({prefix + buf, pts[i]});
  }
  return s;
}

std::vector<std::string> ids_of(const EmbeddedSet& s) {
  std::vector<std::string> out;
  for (const auto& p : s.points) out.push_back(p.sample_id);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- PCA

TEST(ReduceTo2d, AxisAlignedInputIsCentredInput) {
  // x variance 4, y variance 1 (population): x in {-2, 2}, y in {-1, 1}.
  const std::vector<FeatureRow> rows{
      {"a", {3.0f, 6.0f}}, {"b", {7.0f, 6.0f}}, {"c", {3.0f, 4.0f}}, {"d", {7.0f, 4.0f}}};
  const auto r = reduce_to_2d("c", rows);
  EXPECT_TRUE(r.warnings.empty());
  const std::vector<Point2> expect{{-2, 1}, {2, 1}, {-2, -1}, {2, -1}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(r.set.points[i].sample_id, rows[i].sample_id);
    EXPECT_NEAR(r.set.points[i].xy[0], expect[i][0], 1e-12);
    EXPECT_NEAR(r.set.points[i].xy[1], expect[i][1], 1e-12);
  }
}

TEST(ReduceTo2d, CollinearPointsLoseSecondCoordinate) {
  std::vector<FeatureRow> rows;
  for (int i = 0; i < 6; ++i) rows.push_back({"s" + std::to_string(i), {float(i), float(2 * i), float(-i)}});
  const auto r = reduce_to_2d("c", rows);
  ASSERT_EQ(r.warnings.size(), 1u);
  const double step = std::sqrt(6.0);
  for (int i = 0; i < 6; ++i) {
    EXPECT_NEAR(r.set.points[std::size_t(i)].xy[0], (i - 2.5) * step, 1e-5);
    EXPECT_EQ(r.set.points[std::size_t(i)].xy[1], 0.0);
  }
}

TEST(ReduceTo2d, ZeroVarianceCollapsesToOrigin) {
  std::vector<FeatureRow> rows(5, FeatureRow{"", {1.0f, 2.0f, 3.0f}});
  for (int i = 0; i < 5; ++i) rows[std::size_t(i)].sample_id = "s" + std::to_string(i);
  const auto r = reduce_to_2d("c", rows);
  ASSERT_EQ(r.warnings.size(), 1u);
  for (const auto& p : r.set.points) {
    EXPECT_EQ(p.xy[0], 0.0);
    EXPECT_EQ(p.xy[1], 0.0);
  }
}

TEST(ReduceTo2d, HighDimensionalInputPreservesPairwiseGeometryOfTopComponents) {
  // More dimensions than rows exercises the n x n Gram path.
  Rng r(2);
  std::vector<FeatureRow> rows;
  for (int i = 0; i < 5; ++i) {
    FeatureRow f{"s" + std::to_string(i), std::vector<float>(12, 0.0f)};
    f.values[0] = float(3 * r.normal());
    f.values[1] = float(r.normal());
    rows.push_back(f);
  }
  const auto out = reduce_to_2d("c", rows);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      const double dx = rows[i].values[0] - rows[j].values[0], dy = rows[i].values[1] - rows[j].values[1];
      const double ex = out.set.points[i].xy[0] - out.set.points[j].xy[0];
      const double ey = out.set.points[i].xy[1] - out.set.points[j].xy[1];
      EXPECT_NEAR(std::hypot(dx, dy), std::hypot(ex, ey), 1e-5);
    }
  }
  EXPECT_THROW(reduce_to_2d("c", {rows[0]}), DataError);
}

TEST(EmbeddingCsv, RoundTrip) {
  const auto s = embedded("p", {{1.5, -2}, {0.125, 3}});
  std::stringstream buf;
  write_embedding_csv(buf, s);
  const auto path = std::filesystem::temp_directory_path() / "dshift_embed.csv";
  {
    std::ofstream out(path);
    out << buf.str();
  }
  const auto back = read_embedding_csv(path.string(), "c");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.points[1].sample_id, "p0001");
  EXPECT_EQ(back.points[1].xy, (Point2{0.125, 3}));
  {
    std::ofstream out(path);
    out << "sample_id,x,y\na,1,2\na,3,4\n";
  }
  EXPECT_THROW(read_embedding_csv(path.string(), "c"), DataError);
}

// ---------------------------------------------------------------- KDE

TEST(Kde, SinglePointPeakAndFloor) {
  const auto est = fit_kde({{3, 4}});
  EXPECT_DOUBLE_EQ(est.bandwidth, 1e-6);
  const auto wide = DensityEstimator{{{3, 4}}, 0.5};
  EXPECT_NEAR(eval_kde(wide, {3, 4}), 1.0 / (2 * std::numbers::pi * 0.25), 1e-12);
  EXPECT_LT(eval_kde(wide, {3 + 21 * 0.5, 4}) / eval_kde(wide, {3, 4}), 1e-12);
  EXPECT_GT(kde_log_density(wide.points, wide.bandwidth, {3 + 400, 4}), -1e6);  // finite in the far tail
}

TEST(Kde, IdenticalPointsUseFloor) {
  EXPECT_DOUBLE_EQ(fit_kde(std::vector<Point2>(5, Point2{1, 1})).bandwidth, 1e-6);
  EXPECT_NEAR(fit_kde({{0, 0}, {0, 0}, {4, 0}}).bandwidth, oracle::silverman({{0, 0}, {0, 0}, {4, 0}}), 1e-15);
}

TEST(Kde, TwoPointMidpoint) {
  const DensityEstimator est{{{0, 0}, {2, 0}}, 0.8};
  const double k = std::exp(-1.0 / (2 * 0.64)) / (2 * std::numbers::pi * 0.64);
  EXPECT_NEAR(eval_kde(est, {1, 0}), k, 1e-15);
}

TEST(Kde, SilvermanOnStandardNormals) {
  Rng r(31);
  const auto pts = cloud(r, 100, 0, 0);
  const double h = fit_kde(pts).bandwidth;
  EXPECT_NEAR(h, std::pow(100.0, -1.0 / 6.0), 0.2 * std::pow(100.0, -1.0 / 6.0));
  EXPECT_NEAR(h, oracle::silverman(pts), 1e-14);
}

TEST(Kde, IntegratesToOne) {
  Rng r(8);
  auto pts = cloud(r, 40, 0, 0);
  const auto more = cloud(r, 20, 5, -3, 0.5);
  pts.insert(pts.end(), more.begin(), more.end());
  const auto est = fit_kde(pts);
  double lo[2] = {1e9, 1e9}, hi[2] = {-1e9, -1e9};
  for (const auto& p : pts) {
    for (int d = 0; d < 2; ++d) {
      lo[d] = std::min(lo[d], p[d] - 6 * est.bandwidth);
      hi[d] = std::max(hi[d], p[d] + 6 * est.bandwidth);
    }
  }
  const int n = 400;
  const double dx = (hi[0] - lo[0]) / n, dy = (hi[1] - lo[1]) / n;
  double total = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) total += eval_kde(est, {lo[0] + (i + 0.5) * dx, lo[1] + (j + 0.5) * dy});
  }
  EXPECT_NEAR(total * dx * dy, 1.0, 0.01);
}

TEST(Kde, MatchesOracleDensity) {
  Rng r(10);
  const auto pts = cloud(r, 30, 1, 2);
  const double h = fit_kde(pts).bandwidth;
  for (int k = 0; k < 50; ++k) {
    const Point2 x{1 + 3 * r.normal(), 2 + 3 * r.normal()};
    const double want = oracle::density(pts, h, x);
    EXPECT_NEAR(eval_kde({pts, h}, x), want, 1e-12 * std::max(1.0, want));
  }
}

// ---------------------------------------------------------------- d_KL

TEST(SymKl, IdenticalSetsGiveZero) {
  Rng r(1);
  const auto a = cloud(r, 40, 0, 0);
  for (auto v : {KlVariant::paired, KlVariant::plugin}) {
    const double h = kde_bandwidth(a);
    EXPECT_EQ(sym_kl(a, h, a, h, v), 0.0);
  }
}

TEST(SymKl, SymmetricBitForBit) {
  Rng r(2);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + r.below(40);
    const auto a = cloud(r, n, 0, 0), b = cloud(r, n, 3 * r.uniform(), 0, 0.5 + r.uniform());
    const double ha = kde_bandwidth(a), hb = kde_bandwidth(b);
    for (auto v : {KlVariant::paired, KlVariant::plugin}) EXPECT_EQ(sym_kl(a, ha, b, hb, v), sym_kl(b, hb, a, ha, v));
  }
}

TEST(SymKl, SeparatedCloudsMatchOracle) {
  Rng r(3);
  const auto a = cloud(r, 50, 0, 0), b = cloud(r, 50, 10, 0);
  const double ha = kde_bandwidth(a), hb = kde_bandwidth(b);
  const double want = oracle::sym_kl_paired(a, oracle::silverman(a), b, oracle::silverman(b));
  EXPECT_NEAR(sym_kl(a, ha, b, hb), want, 1e-9 * std::max(1.0, std::fabs(want)));
  const double plug = oracle::sym_kl_plugin(a, ha, b, hb);
  EXPECT_NEAR(sym_kl(a, ha, b, hb, KlVariant::plugin), plug, 1e-9 * std::max(1.0, std::fabs(plug)));
  EXPECT_GT(plug, 10.0);
}

TEST(SymKl, RandomPairsMatchOracle) {
  Rng r(4);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 1 + r.below(60);
    const auto a = cloud(r, n, 0, 0, 0.3 + r.uniform()), b = cloud(r, n, 4 * r.uniform(), 2 * r.uniform());
    const double ha = kde_bandwidth(a), hb = kde_bandwidth(b);
    const double want = oracle::sym_kl_paired(a, ha, b, hb);
    EXPECT_NEAR(sym_kl(a, ha, b, hb), want, 1e-9 * std::max(1.0, std::fabs(want))) << t;
  }
}

TEST(SymKl, SizeMismatchIsError) {
  const EmbeddedSet a = embedded("a", {{0, 0}, {1, 1}});
  const EmbeddedSet b = embedded("b", {{0, 0}});
  EXPECT_THROW(sym_kl(a, b), DataError);
  EXPECT_THROW(parse_kl_variant("other"), UsageError);
}

// ---------------------------------------------------------------- greedy

void check_invariants(const AspectMatch& m, const EmbeddedSet& a, const EmbeddedSet& b) {
  std::set<std::string> ua, ub;
  for (std::size_t i = 0; i < m.pairs.size(); ++i) {
    if (i) EXPECT_GE(m.pairs[i].distance, m.pairs[i - 1].distance);
    EXPECT_TRUE(ua.insert(m.pairs[i].id_a).second);
    EXPECT_TRUE(ub.insert(m.pairs[i].id_b).second);
  }
  ASSERT_FALSE(m.pairs.empty());
  ASSERT_EQ(m.curve.size(), m.pairs.size());
  EXPECT_LE(m.pairs.size(), std::min(a.size(), b.size()));
  if (m.single_pair_fallback) {
    EXPECT_EQ(m.pairs.size(), 1u);
    EXPECT_FALSE(m.warnings.empty());
  } else {
    EXPECT_LT(m.final_d_kl(), m.epsilon);
  }
}

TEST(GreedyMatch, IdenticalSetsSelectEverything) {
  Rng r(5);
  const auto pts = cloud(r, 25, 0, 0);
  const auto a = embedded("a", pts), b = embedded("b", pts);
  const auto m = greedy_aspect_match(a, b, 0.1);
  ASSERT_EQ(m.pairs.size(), 25u);
  for (const auto& p : m.pairs) {
    EXPECT_EQ(p.distance, 0.0);
    EXPECT_EQ(p.id_a.substr(1), p.id_b.substr(1));
  }
  EXPECT_EQ(m.final_d_kl(), 0.0);
  EXPECT_FALSE(m.breach.has_value());
}

TEST(GreedyMatch, SeparatedClustersStopEarlyLikeReplay) {
  Rng r(6);
  auto pa = cloud(r, 40, 0, 0), pb = cloud(r, 40, 6, 0);
  const auto a = embedded("a", pa), b = embedded("b", pb);
  const auto m = greedy_aspect_match(a, b, 0.1);
  check_invariants(m, a, b);
  EXPECT_LT(m.pairs.size(), 40u);
  const auto rep = oracle::greedy(pa, ids_of(a), pb, ids_of(b), 0.1, oracle::sym_kl_paired);
  ASSERT_EQ(rep.pairs.size(), m.pairs.size());
  for (std::size_t i = 0; i < rep.pairs.size(); ++i) {
    EXPECT_EQ(a.points[rep.pairs[i].first].sample_id, m.pairs[i].id_a);
    EXPECT_EQ(b.points[rep.pairs[i].second].sample_id, m.pairs[i].id_b);
    EXPECT_NEAR(rep.curve[i], m.curve[i].d_kl, 1e-9);
  }
}

TEST(GreedyMatch, RandomPairsMatchReplayAndEpsilonMonotone) {
  Rng r(7);
  for (int t = 0; t < 20; ++t) {
    const std::size_t na = 2 + r.below(30), nb = 2 + r.below(30);
    const auto pa = cloud(r, na, 0, 0), pb = cloud(r, nb, 3 * r.uniform(), 3 * r.uniform(), 0.5 + r.uniform());
    const auto a = embedded("a", pa), b = embedded("b", pb);
    std::size_t last = 0;
    for (double eps : {0.05, 0.1, 0.2, 0.5}) {
      for (auto v : {KlVariant::paired, KlVariant::plugin}) {
        const auto m = greedy_aspect_match(a, b, eps, v);
        check_invariants(m, a, b);
        const auto rep = v == KlVariant::paired
                             ? oracle::greedy(pa, ids_of(a), pb, ids_of(b), eps, oracle::sym_kl_paired)
                             : oracle::greedy(pa, ids_of(a), pb, ids_of(b), eps, oracle::sym_kl_plugin);
        ASSERT_EQ(rep.pairs.size(), m.pairs.size()) << t << " eps " << eps;
        EXPECT_EQ(rep.single, m.single_pair_fallback);
        if (v == KlVariant::paired) {
          EXPECT_GE(m.pairs.size(), last) << t << " eps " << eps;
          last = m.pairs.size();
        }
      }
    }
  }
}

TEST(GreedyMatch, SinglePairFallback) {
  const auto a = embedded("a", {{0, 0}, {0, 1}});
  const auto b = embedded("b", {{50, 0}, {50, 3}});
  const auto m = greedy_aspect_match(a, b, 1e-9);
  check_invariants(m, a, b);
  EXPECT_TRUE(m.single_pair_fallback);
  EXPECT_EQ(m.pairs[0].id_a, "a0000");
  EXPECT_EQ(m.pairs[0].id_b, "b0000");
}

TEST(GreedyMatch, TiesBrokenById) {
  // Both a points are at distance 1 from both b points.
  const auto a = embedded("a", {{0, 1}, {0, -1}});
  const auto b = embedded("b", {{1, 0}, {-1, 0}});
  const auto m = greedy_aspect_match(a, b, 100.0);
  ASSERT_EQ(m.pairs.size(), 2u);
  EXPECT_EQ(m.pairs[0].id_a, "a0000");
  EXPECT_EQ(m.pairs[0].id_b, "b0000");
  EXPECT_EQ(m.pairs[1].id_a, "a0001");
  EXPECT_EQ(m.pairs[1].id_b, "b0001");
}

TEST(GreedyMatch, CurveCsvAndErrors) {
  const auto a = embedded("a", {{0, 0}, {1, 0}});
  const auto m = greedy_aspect_match(a, a, 0.1);
  std::ostringstream out;
  write_curve_csv(out, m);
  EXPECT_EQ(out.str(), "pair_count,d_kl\n1,0\n2,0\n");
  EXPECT_THROW(greedy_aspect_match(a, a, 0.0), UsageError);
  EXPECT_THROW(greedy_aspect_match(a, EmbeddedSet{"c", {}}, 0.1), DataError);
}
