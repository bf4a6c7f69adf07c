#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "dshift/boxsample/boxsample.hpp"

using namespace dshift;

namespace {

CandidateBox candidate(const std::string& image, double objectness, double contact = 0.0) {
  CandidateBox c;
  c.image_id = image;
  c.box = {10, 10, 20, 20};
  c.objectness = objectness;
  c.border_contact = contact;
  return c;
}

}  // namespace

TEST(BorderContact, PerimeterShares) {
  const ImageSize img{500, 400};
  EXPECT_DOUBLE_EQ(border_contact({50, 50, 150, 100}, img), 0.0);
  EXPECT_DOUBLE_EQ(border_contact({0, 0, 500, 400}, img), 1.0);
  EXPECT_DOUBLE_EQ(border_contact({0, 100, 100, 150}, img), 50.0 / 300.0);
  EXPECT_DOUBLE_EQ(border_contact({0.8, 100, 100.8, 150}, img), 50.0 / 300.0);  // within one pixel
  EXPECT_DOUBLE_EQ(border_contact({2, 100, 102, 150}, img), 0.0);
  EXPECT_DOUBLE_EQ(border_contact({400, 0, 500, 50}, img), 150.0 / 300.0);  // top and right
}

TEST(BoxQuality, ProductRule) {
  EXPECT_DOUBLE_EQ(box_quality(1.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(box_quality(0.0, 0.7), 0.0);
  EXPECT_DOUBLE_EQ(box_quality(0.8, 0.25), 0.6);
  EXPECT_THROW(box_quality(1.2, 0.0), DataError);
}

TEST(MultinomialSample, AllWeightOnOne) {
  const std::vector<double> w{0.0, 1.0, 0.0};
  for (std::uint64_t s = 0; s < 100; ++s) EXPECT_EQ(multinomial_sample_indices(w, 1, s), std::vector<std::size_t>{1});
}

TEST(MultinomialSample, UniformFullPoolIsPermutation) {
  const std::vector<double> w(9, 1.0);
  std::set<std::vector<std::size_t>> orders;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto idx = multinomial_sample_indices(w, 9, s);
    orders.insert(idx);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(idx[i], i);
  }
  EXPECT_GT(orders.size(), 15u);
}

TEST(MultinomialSample, FirstDrawFrequenciesMatchWeights) {
  const std::vector<double> w{0.7, 0.2, 0.1};
  const int n = 10000;
  std::array<int, 3> hits{};
  for (int s = 0; s < n; ++s) hits[multinomial_sample_indices(w, 1, std::uint64_t(s))[0]]++;
  double chi2 = 0;
  for (int i = 0; i < 3; ++i) {
    const double expect = n * w[std::size_t(i)];
    const double sd = std::sqrt(n * w[std::size_t(i)] * (1 - w[std::size_t(i)]));
    EXPECT_LE(std::fabs(hits[std::size_t(i)] - expect), 3 * sd) << i;
    chi2 += (hits[std::size_t(i)] - expect) * (hits[std::size_t(i)] - expect) / expect;
  }
  EXPECT_LT(chi2, 13.8);  // 2 dof, p = 0.001
}

TEST(MultinomialSample, SecondDrawRenormalizes) {
  // Given the first pick is 0 (p 0.7), the second is 1 with p 2/3.
  const std::vector<double> w{0.7, 0.2, 0.1};
  int first0 = 0, then1 = 0;
  for (int s = 0; s < 20000; ++s) {
    const auto idx = multinomial_sample_indices(w, 2, std::uint64_t(s));
    if (idx[0] != 0) continue;
    ++first0;
    then1 += idx[1] == 1;
  }
  const double p = double(then1) / first0;
  EXPECT_NEAR(p, 2.0 / 3.0, 3 * std::sqrt(2.0 / 9.0 / first0));
}

TEST(MultinomialSample, NoDuplicatesAndZeroWeightExcluded) {
  Rng r(4);
  for (std::uint64_t s = 0; s < 200; ++s) {
    std::vector<double> w(20);
    std::size_t positive = 0;
    for (auto& x : w) {
      x = r.uniform() < 0.3 ? 0.0 : r.uniform();
      positive += x > 0;
    }
    if (positive == 0) continue;
    const std::size_t n = 1 + r.below(positive);
    const auto idx = multinomial_sample_indices(w, n, s);
    ASSERT_EQ(idx.size(), n);
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), n);
    for (std::size_t i : idx) EXPECT_GT(w[i], 0.0);
  }
}

TEST(MultinomialSample, ShortfallIsReported) {
  try {
    multinomial_sample_indices({0.5, 0.0, 0.2}, 3, 1);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("short by 1"), std::string::npos);
  }
}

TEST(MultinomialSample, SeedDeterminism) {
  std::vector<CandidateBox> pool;
  for (int i = 0; i < 30; ++i) pool.push_back(candidate("im" + std::to_string(i), 0.1 + 0.03 * i, 0.1));
  const auto a = multinomial_sample(pool, 10, 99);
  const auto b = multinomial_sample(pool, 10, 99);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].image_id, b[i].image_id);
  const auto c = multinomial_sample(pool, 10, 100);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i].image_id != c[i].image_id;
  EXPECT_TRUE(differs);
}

TEST(MultinomialSample, FullBorderContactNeverDrawn) {
  std::vector<CandidateBox> pool{candidate("a", 0.9, 1.0), candidate("b", 0.3, 0.0), candidate("c", 0.5, 0.5)};
  for (std::uint64_t s = 0; s < 200; ++s) {
    for (const auto& c : multinomial_sample(pool, 2, s)) EXPECT_NE(c.image_id, "a");
  }
}

TEST(CorLocOfSampled, PairsWithBestGroundTruth) {
  std::vector<Sample> gts(3);
  gts[0] = {"g0", "im1", "c", {0, 0, 10, 10}};
  gts[1] = {"g1", "im1", "c", {50, 50, 60, 60}};
  gts[2] = {"g2", "im2", "c", {0, 0, 10, 10}};
  const Dataset gt("gt", gts, {{"im1", {100, 100}}, {"im2", {100, 100}}});

  CandidateBox hit1 = candidate("im1", 1.0);
  hit1.box = {50, 50, 60, 60};
  CandidateBox miss = candidate("im2", 1.0);
  miss.box = {0, 0, 10, 4};  // IoU 0.4
  CandidateBox stray = candidate("im9", 1.0);
  const auto r = corloc_of_sampled({hit1, miss, stray}, gt);
  EXPECT_DOUBLE_EQ(*r.corloc, 50.0);
  EXPECT_EQ(r.paired, 2u);
  EXPECT_EQ(r.unmatched, 1u);

  CandidateBox same = candidate("im2", 1.0);
  same.box = {0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(*corloc_of_sampled({same, same}, gt).corloc, 100.0);
}

TEST(Candidates, ReadCsvComputesContact) {
  const auto path = std::filesystem::temp_directory_path() / "dshift_candidates.csv";
  {
    std::ofstream out(path);
    out << "image_id,x_min,y_min,x_max,y_max,objectness,frame_index\n"
        << "f1,0,100,100,150,0.9,3\n"
        << "f1,50,50,150,100,0.4,4\n";
  }
  const std::map<std::string, ImageSize> dims{{"f1", {500, 400}}};
  const auto c = read_candidates(path.string(), dims);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_DOUBLE_EQ(c[0].border_contact, 50.0 / 300.0);
  EXPECT_EQ(c[0].frame_index, 3);
  EXPECT_DOUBLE_EQ(c[1].border_contact, 0.0);
  EXPECT_DOUBLE_EQ(box_quality(c[1].objectness, c[1].border_contact), 0.4);

  {
    std::ofstream out(path);
    out << "image_id,x_min,y_min,x_max,y_max,objectness\nf1,0,0,10,10,1.5\n";
  }
  EXPECT_THROW(read_candidates(path.string(), dims), DataError);
  {
    std::ofstream out(path);
    out << "image_id,x_min,y_min,x_max,y_max,objectness\nf2,0,0,10,10,0.5\n";
  }
  EXPECT_THROW(read_candidates(path.string(), dims), DataError);
}
