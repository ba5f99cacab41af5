#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "sessionrec/checkpoint.hpp"
#include "sessionrec/evaluator.hpp"
#include "sessionrec/metrics.hpp"
#include "test_support.hpp"

using namespace sessionrec;
using namespace testsupport;

namespace {

std::vector<std::size_t> sort_oracle(const std::vector<double>& s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  return idx;
}

double recall_oracle(const std::vector<std::size_t>& ranked, const std::set<std::size_t>& t, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t p = 0; p < std::min(k, ranked.size()); ++p) hits += t.count(ranked[p]);
  return static_cast<double>(hits) / static_cast<double>(t.size());
}

double ndcg_oracle(const std::vector<std::size_t>& ranked, const std::set<std::size_t>& t, std::size_t k) {
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t p = 1; p <= std::min(k, ranked.size()); ++p)
    if (t.count(ranked[p - 1])) dcg += 1.0 / std::log2(static_cast<double>(p) + 1.0);
  for (std::size_t p = 1; p <= std::min(k, t.size()); ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 1.0);
  return dcg / idcg;
}

ModelConfig eval_model_config(std::size_t items) {
  ModelConfig c;
  c.embedding.num_items = items;
  c.embedding.d = 8;
  c.embedding.d_id = 8;
  c.embedding.d_feature = 4;
  c.embedding.features = {{"polarity", 2}, {"category", 3}};
  c.sse.layers = 1;
  c.sse.heads = 2;
  c.sse.max_positions = 8;
  return c;
}

Catalog eval_catalog(std::size_t items) {
  Catalog cat;
  cat.size = items;
  cat.feature_width = 2;
  for (std::size_t i = 0; i < items; ++i) {
    cat.features.push_back(1);
    cat.features.push_back(static_cast<std::uint32_t>(i % 3));
  }
  return cat;
}

DatasetSplit random_split(std::mt19937_64& rng, std::size_t users, std::size_t items) {
  std::vector<SessionizedSequence> seqs;
  for (std::size_t u = 0; u < users; ++u) {
    auto s = random_history(rng, 3 + rng() % 4, 4, items, 3);
    s.user_id = "user" + std::to_string(100 + u);
    seqs.push_back(s);
  }
  return make_split(seqs, items, Protocol::leave_one_session_out, 200);
}

}  // namespace

TEST_CASE("top_k examples and tie-breaking") {
  const std::vector<double> s{0.5, 2.0, 0.5, -1.0, 2.0};
  CHECK(top_k(std::span<const double>(s), 5) == std::vector<std::size_t>{1, 4, 0, 2, 3});
  CHECK(top_k(std::span<const double>(s), 2) == std::vector<std::size_t>{1, 4});
  CHECK_THROWS(top_k(std::span<const double>(s), 6));

  const auto eye = Tensor<float>::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto u = Tensor<float>::from_rows({{0, 0, 1}});
  CHECK(top_k(u, eye, 1) == std::vector<std::size_t>{2});
  auto full = top_k(u, eye, 3);
  std::sort(full.begin(), full.end());
  CHECK(full == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("metric closed forms and errors") {
  const std::vector<std::size_t> ranked{7, 3, 9, 1, 4};
  const std::vector<std::size_t> four{3, 1, 8, 6};
  CHECK(recall_at_k(ranked, four, 5) == 0.5);
  const std::vector<std::size_t> first{7, 3};
  CHECK(recall_at_k(ranked, first, 2) == 1.0);
  const std::vector<std::size_t> top{7};
  CHECK(ndcg_at_k(ranked, top, 10) == 1.0);
  const std::vector<std::size_t> third{9};
  CHECK(ndcg_at_k(ranked, third, 10) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ndcg_at_k(ranked, third, 2) == 0.0);
  CHECK_THROWS(recall_at_k(ranked, {}, 3));
  CHECK_THROWS(ndcg_at_k(ranked, {}, 3));
}

TEST_CASE("metrics and top_k agree with brute-force oracles") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t v = 20;
    std::vector<double> s(v);
    for (auto& x : s) x = n(rng);
    const auto oracle = sort_oracle(s);
    const std::size_t k = 1 + rng() % v;
    const auto got = top_k(std::span<const double>(s), k);
    CHECK(std::equal(got.begin(), got.end(), oracle.begin()));
    std::set<std::size_t> targets;
    const std::size_t nt = 1 + rng() % 5;
    while (targets.size() < nt) targets.insert(rng() % v);
    const std::vector<std::size_t> tv(targets.begin(), targets.end());
    double prev = 0.0;
    for (std::size_t kk : {1u, 3u, 5u, 10u, 20u}) {
      const double r = recall_at_k(oracle, tv, kk);
      CHECK(r == doctest::Approx(recall_oracle(oracle, targets, kk)).epsilon(1e-14));
      CHECK(ndcg_at_k(oracle, tv, kk) == doctest::Approx(ndcg_oracle(oracle, targets, kk)).epsilon(1e-14));
      CHECK(r >= prev);
      prev = r;
    }
  }
}

TEST_CASE("single-target NDCG is 1/log2(rank+1) inside the cutoff") {
  std::vector<std::size_t> ranked(50);
  std::iota(ranked.begin(), ranked.end(), 0);
  for (std::size_t rank = 1; rank <= 50; ++rank) {
    const std::vector<std::size_t> t{rank - 1};
    const double expected = rank <= 20 ? 1.0 / std::log2(rank + 1.0) : 0.0;
    CHECK(ndcg_at_k(ranked, t, 20) == doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("random ranking recall matches the hypergeometric mean") {
  std::mt19937_64 rng(123);
  std::vector<std::size_t> ranked(1000);
  std::iota(ranked.begin(), ranked.end(), 0);
  double total = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    std::shuffle(ranked.begin(), ranked.end(), rng);
    std::vector<std::size_t> targets;
    std::set<std::size_t> seen;
    while (seen.size() < 10) {
      const std::size_t v = rng() % 1000;
      if (seen.insert(v).second) targets.push_back(v);
    }
    total += recall_at_k(ranked, targets, 100);
  }
  CHECK(std::abs(total / trials - 0.1) <= 0.01);
}

TEST_CASE("an oracle item table surfaces the targets") {
  Model<float> model(eval_model_config(50), 1);
  std::mt19937_64 rng(2);
  const auto seq = random_history(rng, 4, 3, 50, 3);
  const std::vector<std::size_t> targets{4, 17, 23};
  const auto u = model.user_vector(seq);
  Tensor<float> items(50, 8);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t c = 0; c < 8; ++c) items(i, c) = -u(0, c) * 0.01f * static_cast<float>(i % 5);
  for (auto t : targets)
    for (std::size_t c = 0; c < 8; ++c) items(t, c) = u(0, c);
  const EvalCase cs{&seq, &targets};
  const auto m = evaluate_cases(model, items, std::span(&cs, 1), EvalOptions{{10, 100}, 1});
  CHECK(m.recall[0] == 1.0);
  CHECK(m.ndcg[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.recall[1] == 1.0);
}

TEST_CASE("evaluate matches a flat per-user recomputation") {
  std::mt19937_64 rng(3);
  const std::size_t items = 60;
  const auto split = random_split(rng, 20, items);
  REQUIRE(split.users.size() == 20);
  Model<float> model(eval_model_config(items), 9);
  const auto catalog = eval_catalog(items);
  const auto report = evaluate(model, catalog, split, EvalOptions{{5, 20, 500}, 1});
  CHECK(report.cutoffs == std::vector<std::size_t>{5, 20, 500});
  CHECK(report.num_users == 20);

  const auto item_vecs = model.item_vectors(catalog);
  std::vector<double> r(3), n(3);
  for (const auto& u : split.users) {
    const auto uv = model.user_vector(u.train_view);
    std::vector<double> s(items);
    for (std::size_t i = 0; i < items; ++i) {
      float dot = 0.0f;
      for (std::size_t c = 0; c < 8; ++c) dot += uv(0, c) * item_vecs(i, c);
      s[i] = dot;
    }
    const auto ranked = sort_oracle(s);
    const std::set<std::size_t> t(u.test_target.begin(), u.test_target.end());
    const std::size_t ks[] = {5, 20, 500};
    for (int j = 0; j < 3; ++j) {
      r[j] += recall_oracle(ranked, t, ks[j]) / 20.0;
      n[j] += ndcg_oracle(ranked, t, ks[j]) / 20.0;
    }
  }
  for (int j = 0; j < 3; ++j) {
    CHECK(report.recall[j] == doctest::Approx(r[j]).epsilon(1e-9));
    CHECK(report.ndcg[j] == doctest::Approx(n[j]).epsilon(1e-9));
    CHECK(report.recall[j] >= 0.0);
    CHECK(report.recall[j] <= 1.0);
  }
  CHECK(report.recall[2] == 1.0);  // cutoff beyond the catalog ranks everything
  CHECK(report.recall[0] <= report.recall[1]);
}

TEST_CASE("evaluation is deterministic and thread-count independent") {
  std::mt19937_64 rng(4);
  const auto split = random_split(rng, 30, 40);
  Model<float> model(eval_model_config(40), 5);
  const auto catalog = eval_catalog(40);
  const auto a = evaluate(model, catalog, split);
  const auto b = evaluate(model, catalog, split);
  const auto c = evaluate(model, catalog, split, EvalOptions{kDefaultCutoffs, 4});
  CHECK(a.to_json() == b.to_json());
  CHECK(a.to_json() == c.to_json());
  CHECK(a.to_table() == c.to_table());
}

TEST_CASE("the test session never influences the user vector") {
  std::mt19937_64 rng(5);
  Model<float> model(eval_model_config(40), 6);
  for (int trial = 0; trial < 20; ++trial) {
    auto seq = random_history(rng, 3 + rng() % 4, 4, 39, 3);
    for (auto protocol : {Protocol::leave_one_session_out, Protocol::leave_one_item_out}) {
      const auto before = make_split({seq}, 40, protocol, 200);
      auto probed = seq;
      auto& last = probed.sessions.back();
      // Under the item protocol a later positive would become the target
      // itself, so the probe there is an exposure after the target.
      const auto pol = protocol == Protocol::leave_one_session_out ? Polarity::positive
                                                                   : Polarity::negative;
      last.items.push_back({39, pol, 1000000, {static_cast<std::uint32_t>(pol), 0}});
      const auto after = make_split({probed}, 40, protocol, 200);
      REQUIRE(before.users.size() == 1);
      REQUIRE(after.users.size() == 1);
      CHECK(model.user_vector(before.users[0].train_view) == model.user_vector(after.users[0].train_view));
    }
  }
}

TEST_CASE("report serialization lists every cutoff") {
  EvalReport r;
  r.protocol = "leave_one_session_out";
  r.cutoffs = {10, 100};
  r.recall = {0.25, 0.5};
  r.ndcg = {0.125, 0.375};
  r.num_users = 3;
  r.catalog_size = 7;
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["protocol"] == "leave_one_session_out");
  CHECK(r.recall_at(100) == 0.5);
  CHECK(r.ndcg_at(10) == 0.125);
  CHECK_THROWS(r.recall_at(500));
  CHECK(r.to_table().find("100") != std::string::npos);
}

TEST_CASE("evaluating a checkpoint against another catalog fails") {
  const auto dir = std::filesystem::temp_directory_path() / "sessionrec_eval_mismatch";
  std::filesystem::create_directories(dir);
  Model<float> model(eval_model_config(40), 1);
  save_checkpoint(capture_checkpoint(model, nullptr, 1, 0, ""), dir / "m.ckpt");
  ProcessedDataset data;
  data.catalog_size = 41;
  CHECK_THROWS(evaluate_checkpoint(dir / "m.ckpt", data, Protocol::leave_one_session_out));
  std::filesystem::remove_all(dir);
}
