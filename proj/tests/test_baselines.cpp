#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

#include "clane/baselines.hpp"
#include "oracles.hpp"

using namespace clane;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

struct GaussianTask {
  std::vector<Eigen::VectorXd> xs;
  std::vector<std::int32_t> ys;
};

GaussianTask two_gaussians(int dim, int n_per_class, double sep, double sigma,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  GaussianTask task;
  Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd mu1 = Eigen::VectorXd::Zero(dim);
  mu0[0] = -sep / 2;
  mu1[0] = sep / 2;
  mu1[1] = 0.3 * sep;  // break axis alignment
  for (int i = 0; i < n_per_class; ++i) {
    for (const int c : {0, 1}) {
      Eigen::VectorXd x = c ? mu1 : mu0;
      for (int d = 0; d < dim; ++d) x[d] += sigma * g(rng);
      task.xs.push_back(std::move(x));
      task.ys.push_back(c);
    }
  }
  return task;
}

}  // namespace

TEST_CASE("class means interpolate their samples") {
  NcmClassifier ncm(2);
  ncm.update(vec2(0, 0), 0);
  ncm.update(vec2(2, 2), 0);
  CHECK(ncm.mean(0) == vec2(1, 1));
  CHECK(ncm.count(0) == 2);
}

TEST_CASE("one sample per class makes each sample its own mean") {
  NcmClassifier ncm(2);
  ncm.update(vec2(0, 1), 5);
  ncm.update(vec2(1, 0), 9);
  CHECK(ncm.predict(vec2(0.1, 0.9)) == 5);
  CHECK(ncm.predict(vec2(0.9, 0.1)) == 9);
  CHECK(ncm.state_size() == 4);
}

TEST_CASE("prediction before any update is an error") {
  NcmClassifier ncm(4);
  CHECK_THROWS_AS(ncm.predict(Eigen::VectorXd::Zero(4)), std::logic_error);
  SldaClassifier slda(4);
  CHECK_THROWS_AS(slda.predict(Eigen::VectorXd::Zero(4)), std::logic_error);
  FinetuneLearner ft(4);
  CHECK_THROWS_AS(ft.predict(Eigen::VectorXd::Zero(4)), std::logic_error);
}

TEST_CASE("equidistant queries resolve to the lowest class id") {
  NcmClassifier ncm(2);
  ncm.update(vec2(-1, 0), 3);
  ncm.update(vec2(1, 0), 1);
  CHECK(ncm.predict(vec2(0, 5)) == 1);
}

TEST_CASE("streaming means match a batch average to near machine precision") {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> g;
  const int dim = 16;
  NcmClassifier ncm(dim);
  std::map<std::int32_t, std::vector<Eigen::VectorXd>> byc;
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x[d] = 10.0 * g(rng);
    const std::int32_t y = std::int32_t(rng() % 7);
    ncm.update(x, y);
    byc[y].push_back(std::move(x));
  }
  for (const auto& [label, xs] : byc) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& x : xs) mean += x;
    mean /= double(xs.size());
    CHECK((ncm.mean(label) - mean).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("streaming covariance equals the batch residual covariance") {
  std::mt19937_64 rng(103);
  const int dim = 16;
  const GaussianTask task = two_gaussians(dim, 400, 2.0, 1.0, rng);
  SldaClassifier slda(dim);
  for (std::size_t i = 0; i < task.xs.size(); ++i) slda.update(task.xs[i], task.ys[i]);

  const oracle::BatchLda batch = oracle::BatchLda::fit(task.xs, task.ys, 1e-4, 1e-9);
  const Eigen::MatrixXd sigma = slda.covariance();
  CHECK((sigma - batch.sigma).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(slda.shrinkage() == doctest::Approx(batch.shrink).epsilon(1e-9));
  CHECK(sigma.isApprox(sigma.transpose(), 1e-12));
}

TEST_CASE("the covariance is invariant to sample order") {
  std::mt19937_64 rng(107);
  const int dim = 8;
  GaussianTask task = two_gaussians(dim, 150, 1.5, 1.0, rng);
  SldaClassifier a(dim), b(dim);
  for (std::size_t i = 0; i < task.xs.size(); ++i) a.update(task.xs[i], task.ys[i]);

  std::vector<std::size_t> perm(task.xs.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i : perm) b.update(task.xs[i], task.ys[i]);

  CHECK((a.covariance() - b.covariance()).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("streaming LDA agrees with batch LDA on a dense grid") {
  std::mt19937_64 rng(109);
  const int dim = 8;
  const GaussianTask task = two_gaussians(dim, 300, 3.0, 1.0, rng);
  SldaClassifier slda(dim);
  for (std::size_t i = 0; i < task.xs.size(); ++i) slda.update(task.xs[i], task.ys[i]);
  const oracle::BatchLda batch = oracle::BatchLda::fit(task.xs, task.ys, 1e-4, 1e-9);

  // Probe along the discriminative axis with off-axis noise.
  std::normal_distribution<double> g;
  int agree = 0, total = 0;
  for (int i = 0; i < 2000; ++i) {
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x[d] = 2.5 * g(rng);
    agree += (slda.predict(x) == batch.predict(x));
    ++total;
  }
  CHECK(double(agree) / double(total) >= 0.995);
}

TEST_CASE("a single seen class is always predicted") {
  SldaClassifier slda(4);
  std::mt19937_64 rng(113);
  std::normal_distribution<double> g;
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd x(4);
    for (int d = 0; d < 4; ++d) x[d] = g(rng);
    slda.update(x, 42);
  }
  Eigen::VectorXd probe(4);
  probe << 9, -9, 3, 0;
  CHECK(slda.predict(probe) == 42);
}

TEST_CASE("updates after a prediction refresh the discriminants") {
  std::mt19937_64 rng(127);
  const int dim = 4;
  SldaClassifier slda(dim);
  slda.update(Eigen::VectorXd::Zero(dim), 0);
  slda.update(Eigen::VectorXd::Ones(dim), 1);
  (void)slda.predict(Eigen::VectorXd::Ones(dim));  // builds the cache
  // Push class 0 far away; the cached discriminants must not survive.
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x = 10.0 * Eigen::VectorXd::Ones(dim);
    std::normal_distribution<double> g;
    for (int d = 0; d < dim; ++d) x[d] += 0.1 * g(rng);
    slda.update(x, 0);
  }
  CHECK(slda.predict(10.0 * Eigen::VectorXd::Ones(dim)) == 0);
}

TEST_CASE("zero learning rate freezes the head") {
  FinetuneLearner ft(3, SgdConfig{.lr = 0.0, .seed = 0});
  std::mt19937_64 rng(131);
  std::normal_distribution<double> g;
  Eigen::VectorXd first(3);
  for (int d = 0; d < 3; ++d) first[d] = g(rng);
  ft.update(first, 0);
  const Eigen::VectorXd w0 = ft.head().weights(0);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd x(3);
    for (int d = 0; d < 3; ++d) x[d] = g(rng);
    ft.update(x, i % 2);
  }
  CHECK(ft.head().weights(0) == w0);
  CHECK((ft.head().weights(0).array() == 0).all());
  CHECK(ft.head().bias(0) == 0.0);
}

TEST_CASE("fine-tuning separates a single task") {
  std::mt19937_64 rng(137);
  const GaussianTask task = two_gaussians(8, 200, 4.0, 0.5, rng);
  FinetuneLearner ft(8, SgdConfig{.lr = 0.05});
  for (int epoch = 0; epoch < 3; ++epoch)
    for (std::size_t i = 0; i < task.xs.size(); ++i) ft.update(task.xs[i], task.ys[i]);
  int correct = 0;
  for (std::size_t i = 0; i < task.xs.size(); ++i)
    correct += (ft.predict(task.xs[i]) == task.ys[i]);
  CHECK(double(correct) / double(task.xs.size()) >= 0.98);
}

TEST_CASE("sequential fine-tuning forgets the first task") {
  // The classes must overlap: on disjoint classes softmax gates the cross
  // gradients to zero and nothing can be unlearned.
  std::mt19937_64 rng(139);
  std::normal_distribution<double> g;
  const int dim = 8;
  auto sample = [&](double center) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    x[0] = center;
    for (int d = 0; d < dim; ++d) x[d] += g(rng);
    return x;
  };
  FinetuneLearner ft(dim, SgdConfig{.lr = 0.1});
  for (int i = 0; i < 300; ++i) ft.update(sample(-1.0), 0);
  for (int i = 0; i < 100; ++i) ft.update(sample(1.0), 1);

  int first_class_correct = 0;
  const int n_eval = 200;
  for (int i = 0; i < n_eval; ++i) first_class_correct += (ft.predict(sample(-1.0)) == 0);
  // After the swap the head has seen only class-1 gradients; class-0 accuracy
  // collapses below the 0.5 class prior.
  CHECK(double(first_class_correct) / n_eval < 0.5);
}

TEST_CASE("replay with zero buffer capacity is exactly fine-tuning") {
  std::mt19937_64 rng(149);
  const GaussianTask task = two_gaussians(6, 100, 2.0, 1.0, rng);
  ReplayConfig cfg;
  cfg.per_class_capacity = 0;
  cfg.minibatch = 8;
  cfg.sgd.lr = 0.02;
  cfg.sgd.seed = 77;
  ReplayLearner replay(6, cfg);
  FinetuneLearner ft(6, cfg.sgd);
  for (std::size_t i = 0; i < task.xs.size(); ++i) {
    replay.update(task.xs[i], task.ys[i]);
    ft.update(task.xs[i], task.ys[i]);
  }
  CHECK(replay.buffer_size() == 0);
  for (const int c : {0, 1}) {
    CHECK(replay.head().weights(c) == ft.head().weights(c));
    CHECK(replay.head().bias(c) == ft.head().bias(c));
  }
}

TEST_CASE("short streams make the seed irrelevant") {
  // With at most `minibatch` samples total, the whole buffer is replayed and
  // the reservoir never evicts, so no random draws can influence the result.
  std::mt19937_64 rng(151);
  const GaussianTask task = two_gaussians(4, 3, 2.0, 1.0, rng);  // 6 samples
  ReplayConfig a;
  a.sgd.seed = 1;
  ReplayConfig b;
  b.sgd.seed = 999;
  ReplayLearner ra(4, a), rb(4, b);
  for (std::size_t i = 0; i < task.xs.size(); ++i) {
    ra.update(task.xs[i], task.ys[i]);
    rb.update(task.xs[i], task.ys[i]);
  }
  for (const int c : {0, 1}) {
    CHECK(ra.head().weights(c) == rb.head().weights(c));
    CHECK(ra.head().bias(c) == rb.head().bias(c));
  }
}

TEST_CASE("replay reruns are bitwise identical under a fixed seed") {
  std::mt19937_64 rng(157);
  const GaussianTask task = two_gaussians(8, 120, 2.0, 1.0, rng);
  ReplayConfig cfg;
  cfg.per_class_capacity = 16;
  cfg.sgd.seed = 2024;
  ReplayLearner a(8, cfg), b(8, cfg);
  for (std::size_t i = 0; i < task.xs.size(); ++i) {
    a.update(task.xs[i], task.ys[i]);
    b.update(task.xs[i], task.ys[i]);
  }
  for (const int c : {0, 1}) {
    REQUIRE(a.head().weights(c).size() == b.head().weights(c).size());
    CHECK((a.head().weights(c).array() == b.head().weights(c).array()).all());
    CHECK(a.head().bias(c) == b.head().bias(c));
  }
  CHECK(a.buffer_size() == b.buffer_size());
  CHECK(a.buffer_size() <= 2 * 16);
}

TEST_CASE("the replay buffer retains old classes and resists forgetting") {
  std::mt19937_64 rng(163);
  std::normal_distribution<double> g;
  const int dim = 8;
  auto sample = [&](double center) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    x[0] = center;
    for (int d = 0; d < dim; ++d) x[d] += 0.3 * g(rng);
    return x;
  };
  ReplayConfig cfg;
  cfg.per_class_capacity = 64;
  cfg.minibatch = 8;
  cfg.sgd.lr = 0.05;
  cfg.sgd.seed = 5;
  ReplayLearner replay(dim, cfg);
  for (int i = 0; i < 300; ++i) replay.update(sample(-2.0), 0);
  for (int i = 0; i < 300; ++i) replay.update(sample(2.0), 1);
  int first_class_correct = 0;
  for (int i = 0; i < 200; ++i) first_class_correct += (replay.predict(sample(-2.0)) == 0);
  CHECK(double(first_class_correct) / 200.0 >= 0.9);
}

TEST_CASE("feature files round-trip and validate") {
  namespace fs = std::filesystem;
  std::mt19937_64 rng(167);
  std::normal_distribution<float> g;
  FeatureSet set;
  set.dim = 6;
  for (int i = 0; i < 40; ++i) {
    Eigen::VectorXf x(6);
    for (int d = 0; d < 6; ++d) x[d] = g(rng);
    set.features.push_back(std::move(x));
    set.labels.push_back(i % 4);
  }
  const fs::path dir = fs::temp_directory_path() / "clane_feat_test";
  fs::create_directories(dir);
  const fs::path p = dir / "set.feat";
  save_features(p, set);
  const FeatureSet back = load_features(p);
  CHECK(back.dim == 6);
  REQUIRE(back.size() == set.size());
  CHECK(back.labels == set.labels);
  for (std::size_t i = 0; i < set.size(); ++i) CHECK(back.features[i] == set.features[i]);

  const auto byc = features_by_class(back);
  CHECK(byc.size() == 4);
  CHECK(byc.at(0).size() == 10);

  // Truncated payload.
  {
    std::ifstream in(p, std::ios::binary);
    std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    bytes.resize(bytes.size() - 3);
    std::ofstream out(dir / "cut.feat", std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
  }
  CHECK_THROWS_AS(load_features(dir / "cut.feat"), std::runtime_error);
  CHECK_THROWS_AS(load_features(dir / "missing.feat"), std::runtime_error);

  FeatureSet bad = set;
  bad.labels.pop_back();
  CHECK_THROWS_AS(save_features(dir / "bad.feat", bad), std::invalid_argument);
  fs::remove_all(dir);
}
