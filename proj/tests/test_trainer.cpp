#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sessionrec/adam.hpp"
#include "sessionrec/checkpoint.hpp"
#include "sessionrec/objective.hpp"
#include "sessionrec/synth.hpp"
#include "sessionrec/trainer.hpp"
#include "test_support.hpp"

using namespace sessionrec;
using namespace testsupport;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("sessionrec_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ProcessedDataset synth_dataset(SynthPattern pattern, std::size_t users, std::size_t catalog,
                               std::uint64_t seed = 7) {
  SynthConfig sc;
  sc.pattern = pattern;
  sc.users = users;
  sc.catalog = catalog;
  sc.sessions = 6;
  sc.seed = seed;
  std::stringstream log;
  write_synthetic_log(sc, log);
  return filter_dataset(ingest(log));
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.d = 16;
  cfg.d_feature = 4;
  cfg.sse.layers = 1;
  cfg.sse.heads = 2;
  cfg.sse.max_positions = 8;
  cfg.loss.num_negatives = 16;
  cfg.batch_size = 8;
  cfg.epochs = 1;
  cfg.validation_interval = 0;
  return cfg;
}

ModelConfig checkpoint_model_config(std::size_t d = 8) {
  ModelConfig c;
  c.embedding.num_items = 20;
  c.embedding.d = d;
  c.embedding.d_id = d;
  c.embedding.d_feature = 4;
  c.embedding.features = {{"polarity", 2}};
  c.sse.layers = 1;
  c.sse.heads = 2;
  c.sse.max_positions = 6;
  return c;
}

void perturb(ParameterSet<float>& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 0.1f);
  for (std::size_t k = 0; k < params.count(); ++k)
    for (auto& v : params[k].value.values()) v += n(rng);
}

}  // namespace

TEST_CASE("one epoch on ten users logs once and writes checkpoints") {
  const auto data = synth_dataset(SynthPattern::copy_last_session, 10, 30);
  const auto dir = scratch("smoke");
  std::size_t callbacks = 0;
  const auto result = train(make_training_set(data), tiny_train_config(),
                            TrainOptions{dir, [&](const EpochLog&) { ++callbacks; }});
  CHECK(result.log.size() == 1);
  CHECK(callbacks == 1);
  CHECK(std::isfinite(result.log[0].loss));
  CHECK(result.log[0].loss > 0.0);
  CHECK(fs::exists(dir / "best.ckpt"));
  CHECK(fs::exists(dir / "last.ckpt"));
  std::ifstream log(dir / "train_log.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == 2);
  fs::remove_all(dir);
}

TEST_CASE("training is bitwise reproducible for a fixed seed") {
  const auto data = make_training_set(synth_dataset(SynthPattern::rotate_catalog, 20, 40));
  auto cfg = tiny_train_config();
  cfg.epochs = 2;
  cfg.sse.dropout = 0.2;
  const auto a = train(data, cfg);
  const auto b = train(data, cfg);
  CHECK(a.log.back().loss_sum == b.log.back().loss_sum);
  REQUIRE(a.best.tensors.size() == b.best.tensors.size());
  for (std::size_t i = 0; i < a.best.tensors.size(); ++i) CHECK(a.best.tensors[i].value == b.best.tensors[i].value);
  cfg.seed = cfg.seed + 1;
  CHECK(train(data, cfg).log.back().loss_sum != a.log.back().loss_sum);
}

TEST_CASE("loss falls on learnable data") {
  const auto data = make_training_set(synth_dataset(SynthPattern::copy_last_session, 40, 60));
  auto cfg = tiny_train_config();
  cfg.epochs = 5;
  const auto result = train(data, cfg);
  REQUIRE(result.log.size() == 5);
  CHECK(result.log[4].loss < result.log[0].loss);
}

TEST_CASE("validation selects the best epoch") {
  const auto data = make_training_set(synth_dataset(SynthPattern::copy_last_session, 30, 60));
  auto cfg = tiny_train_config();
  cfg.epochs = 4;
  cfg.validation_interval = 2;
  cfg.selection_k = 10;
  const auto result = train(data, cfg);
  REQUIRE(result.best_validation_recall.has_value());
  CHECK(!result.log[0].validation_recall.has_value());
  REQUIRE(result.log[1].validation_recall.has_value());
  REQUIRE(result.log[3].validation_recall.has_value());
  const double best = std::max(*result.log[1].validation_recall, *result.log[3].validation_recall);
  CHECK(*result.best_validation_recall == best);
  CHECK(result.best.epoch == result.best_epoch);
}

TEST_CASE("a diverging run stops with a diagnostic") {
  const auto data = make_training_set(synth_dataset(SynthPattern::copy_last_session, 20, 40));
  auto cfg = tiny_train_config();
  cfg.epochs = 50;
  cfg.learning_rate = 1e30;
  try {
    train(data, cfg);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    const std::string what = e.what();
    CHECK(what.find("epoch") != std::string::npos);
    CHECK(what.find("batch") != std::string::npos);
    CHECK(what.find("parameter norm") != std::string::npos);
  }
}

TEST_CASE("adam leaves rows without gradient untouched") {
  ParameterSet<float> params;
  auto& table = params.add("table", 6, 3, true);
  auto& dense = params.add("dense", 1, 3);
  std::mt19937_64 rng(1);
  for (auto& v : table.value.values()) v = std::normal_distribution<float>()(rng);
  const auto before = table.value;
  Adam<float> adam(params, AdamConfig{}, 0.1);
  for (int step = 0; step < 3; ++step) {
    Graph<float> g;
    const std::vector<std::size_t> rows{1, 4};
    g.backward(g.sum(g.mul(g.lookup(table, rows), g.add(g.constant(Tensor<float>(2, 3, 1.0f)), g.param(dense)))));
    adam.step();
    params.zero_grad();
  }
  for (std::size_t r = 0; r < 6; ++r) {
    const bool touched = r == 1 || r == 4;
    for (std::size_t c = 0; c < 3; ++c) CHECK((table.value(r, c) != before(r, c)) == touched);
  }
  CHECK(adam.steps() == 3);
}

TEST_CASE("a model step leaves embedding rows outside the batch untouched") {
  Model<float> model(checkpoint_model_config(), 2);
  std::vector<Session> sessions(3);
  const std::size_t items[3][2] = {{1, 2}, {3, 4}, {5, 6}};
  for (std::size_t s = 0; s < 3; ++s) {
    sessions[s].session_id = "s" + std::to_string(s);
    sessions[s].items.push_back({items[s][0], Polarity::positive, 0, {1}});
    sessions[s].items.push_back({items[s][1], Polarity::negative, 0, {0}});
  }
  TrainingTargets targets = build_targets(sessions);
  for (auto& p : targets.positions) p.sampled_negatives = {7, 8};
  Catalog cat;
  cat.size = 20;
  cat.feature_width = 1;
  cat.features.assign(20, 1);
  const auto before = model.params().at("embedding.item").value;
  Adam<float> adam(model.params(), AdamConfig{}, 0.01);
  Graph<float> g;
  const std::span<const Session> history(sessions.data(), 2);
  const Var h = model.encode_history(g, history, ForwardContext{});
  const auto terms = compute_loss(g, model.embedding(), cat, h, targets, LossConfig{0.5, 2});
  g.backward(terms.total);
  adam.step();
  const auto& after = model.params().at("embedding.item").value;
  const std::set<std::size_t> in_batch{1, 2, 3, 4, 5, 6, 7, 8};
  for (std::size_t r = 0; r < 20; ++r) {
    const bool same = std::equal(before.row(r).begin(), before.row(r).end(), after.row(r).begin());
    CHECK(same == !in_batch.count(r));
  }
}

TEST_CASE("checkpoints round-trip to identical forward outputs") {
  const auto dir = scratch("ckpt_roundtrip");
  Model<float> model(checkpoint_model_config(), 3);
  perturb(model.params(), 4);
  Adam<float> adam(model.params(), AdamConfig{}, 0.01);
  adam.set_steps(17);
  for (auto& m : adam.first_moments()) m.fill(0.25f);
  save_checkpoint(capture_checkpoint(model, &adam, 5, 99, "epochs = 5\n"), dir / "a.ckpt");
  const auto ckpt = load_checkpoint(dir / "a.ckpt");
  CHECK(ckpt.epoch == 5);
  CHECK(ckpt.stats_hash == 99);
  CHECK(ckpt.optimizer_steps == 17);
  CHECK(ckpt.train_config == "epochs = 5\n");
  CHECK(ckpt.config_hash == config_hash(model.config()));

  Model<float> restored(checkpoint_model_config(), 12345);
  restore_model(restored, ckpt);
  Adam<float> adam2(restored.params(), AdamConfig{}, 0.01);
  restore_optimizer(adam2, ckpt);
  CHECK(adam2.steps() == 17);
  CHECK(adam2.first_moments()[0] == adam.first_moments()[0]);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto seq = random_history(rng, 4, 3, 20, 0);
    CHECK(model.user_vector(seq) == restored.user_vector(seq));
  }
  Catalog cat;
  cat.size = 20;
  cat.feature_width = 1;
  cat.features.assign(20, 1);
  CHECK(model.item_vectors(cat) == restored.item_vectors(cat));
  fs::remove_all(dir);
}

TEST_CASE("loading into a model of another width names the field") {
  const auto dir = scratch("ckpt_mismatch");
  Model<float> model(checkpoint_model_config(8), 3);
  save_checkpoint(capture_checkpoint(model, nullptr, 1, 0, ""), dir / "a.ckpt");
  Model<float> other(checkpoint_model_config(16), 3);
  try {
    restore_model(other, load_checkpoint(dir / "a.ckpt"));
    FAIL("expected a mismatch error");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("'d'") != std::string::npos);
  }
  auto deeper = checkpoint_model_config(8);
  deeper.sse.layers = 2;
  CHECK(first_config_difference(checkpoint_model_config(8), deeper) == "sse.layers");
  CHECK(first_config_difference(deeper, deeper).empty());
  fs::remove_all(dir);
}

TEST_CASE("truncated or corrupt checkpoints raise parse errors") {
  const auto dir = scratch("ckpt_fuzz");
  Model<float> model(checkpoint_model_config(), 3);
  Adam<float> adam(model.params(), AdamConfig{}, 0.01);
  save_checkpoint(capture_checkpoint(model, &adam, 1, 0, "x = 1\n"), dir / "full.ckpt");
  std::ifstream in(dir / "full.ckpt", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() > 100);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t cut = trial < 16 ? static_cast<std::size_t>(trial) : rng() % bytes.size();
    {
      std::ofstream out(dir / "cut.ckpt", std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(cut));
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "cut.ckpt"), CheckpointError);
  }
  std::string corrupt = bytes;
  corrupt[0] = 'X';
  {
    std::ofstream out(dir / "bad.ckpt", std::ios::binary);
    out.write(corrupt.data(), static_cast<std::streamsize>(corrupt.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
  fs::remove_all(dir);
}
