#include "sessionrec/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "sessionrec/adam.hpp"
#include "sessionrec/evaluator.hpp"
#include "sessionrec/hash.hpp"
#include "sessionrec/objective.hpp"

namespace sessionrec {

TrainingSet make_training_set(const ProcessedDataset& data) {
  TrainingSet t;
  const DatasetSplit split = make_split(data, Protocol::leave_one_session_out);
  for (const auto& u : split.users) t.histories.push_back(u.train_view);
  t.catalog = make_catalog(data);
  t.features = feature_specs(data.schema);
  t.stats_hash = fnv1a64(stats_json(data.stats));
  return t;
}

void load_model_from(const Checkpoint& ckpt, Model<float>& model) { restore_model(model, ckpt); }

namespace {

struct ValidationSet {
  std::vector<SessionizedSequence> inputs;
  std::vector<std::vector<std::size_t>> targets;
};

double parameter_norm(const ParameterSet<float>& params) {
  double s = 0.0;
  for (std::size_t i = 0; i < params.count(); ++i) {
    for (float v : params[i].value.values()) s += static_cast<double>(v) * v;
  }
  return std::sqrt(s);
}

// Independent generator per purpose so that, for example, changing the
// number of negatives leaves the shuffle order alone.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{seed, purpose, std::uint64_t{0x5e55107ec}};
  return std::mt19937_64(seq);
}

}  // namespace

TrainResult train(const TrainingSet& data, const TrainConfig& cfg, const TrainOptions& options) {
  validate(cfg);
  const ModelConfig mcfg = make_model_config(cfg, data.catalog.size, data.features);
  Model<float> model(mcfg, cfg.seed);
  Adam<float> adam(model.params(), cfg.adam, cfg.learning_rate);
  std::mt19937_64 shuffle_rng = stream(cfg.seed, 1);
  std::mt19937_64 negative_rng = stream(cfg.seed, 2);
  std::mt19937_64 dropout_rng = stream(cfg.seed, 3);
  const std::string config_text = config_to_text(cfg);
  const std::size_t window = cfg.sse.max_positions + 1;  // inputs plus one target session

  // Split off validation targets and keep what remains for training.
  const bool validating = cfg.validation_interval > 0;
  ValidationSet val;
  std::vector<std::span<const Session>> train_seqs;
  for (const auto& h : data.histories) {
    std::span<const Session> s(h.sessions);
    if (validating && s.size() >= 3) {
      SessionizedSequence in;
      in.user_id = h.user_id;
      in.sessions.assign(s.begin(), s.end() - 1);
      val.inputs.push_back(std::move(in));
      val.targets.push_back(s.back().positives());
      s = s.first(s.size() - 1);
    }
    if (s.size() > window) s = s.last(window);
    if (s.size() >= 2) train_seqs.push_back(s);
  }
  if (train_seqs.empty()) {
    throw TrainingError("no user has two or more sessions to learn from");
  }

  std::vector<EvalCase> val_cases;
  for (std::size_t i = 0; i < val.inputs.size(); ++i) {
    val_cases.push_back({&val.inputs[i], &val.targets[i]});
  }

  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);
  std::ofstream log_file;
  if (!options.out_dir.empty()) {
    log_file.open(options.out_dir / "train_log.csv");
    log_file << "epoch,loss_per_positive,retrieval_per_positive,rank_per_positive,loss_sum,"
                "validation_recall,seconds\n";
  }

  TrainResult result;
  std::vector<std::size_t> order(train_seqs.size());
  std::iota(order.begin(), order.end(), 0);
  const ForwardContext ctx{true, &dropout_rng};

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog log;
    log.epoch = epoch;
    double retrieval_sum = 0.0, rank_sum = 0.0;

    for (std::size_t b = 0, batch = 0; b < order.size(); b += cfg.batch_size, ++batch) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      Graph<float> g;
      std::vector<const Session*> sessions;
      std::vector<std::size_t> token_start;
      for (std::size_t i = b; i < e; ++i) {
        const auto s = train_seqs[order[i]];
        token_start.push_back(sessions.size());
        for (std::size_t j = 0; j + 1 < s.size(); ++j) sessions.push_back(&s[j]);
      }
      token_start.push_back(sessions.size());
      const Var tokens = model.session_tokens(g, sessions, ctx);

      std::vector<Var> outputs;
      TrainingTargets targets;
      std::vector<std::size_t> rows;
      for (std::size_t i = b; i < e; ++i) {
        const std::size_t u = i - b;
        rows.resize(token_start[u + 1] - token_start[u]);
        std::iota(rows.begin(), rows.end(), token_start[u]);
        outputs.push_back(
            model.sequence_encoder().encode_sequence(g, g.gather_rows(tokens, rows), ctx));
        append_targets(targets, train_seqs[order[i]], token_start[u]);
      }
      const Var h = outputs.size() == 1 ? outputs.front() : g.concat_rows(outputs);
      draw_sampled_negatives(targets, data.catalog.size, cfg.loss.num_negatives, negative_rng);
      const auto terms = compute_loss(g, model.embedding(), data.catalog, h, targets, cfg.loss);

      const double total = g.value(terms.total)[0];
      if (!std::isfinite(total)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch) + " (parameter norm " +
                            std::to_string(parameter_norm(model.params())) + ")");
      }
      g.backward(terms.total);
      adam.step();
      model.params().zero_grad();

      log.loss_sum += total;
      retrieval_sum += g.value(terms.retrieval)[0];
      rank_sum += g.value(terms.rank)[0];
      log.positives += terms.num_positives;
    }
    const double n = static_cast<double>(std::max<std::size_t>(log.positives, 1));
    log.loss = log.loss_sum / n;
    log.retrieval_loss = retrieval_sum / n;
    log.rank_loss = rank_sum / n;

    const bool last = epoch == cfg.epochs;
    if (validating && !val_cases.empty() && (epoch % cfg.validation_interval == 0 || last)) {
      EvalOptions eo;
      eo.cutoffs = {cfg.selection_k};
      eo.threads = cfg.threads;
      const Tensor<float> items = model.item_vectors(data.catalog);
      const CaseMetrics m = evaluate_cases(model, items, val_cases, eo);
      double recall = 0.0;
      for (double r : m.recall) recall += r;
      recall /= static_cast<double>(m.recall.size());
      log.validation_recall = recall;
      if (!result.best_validation_recall || recall > *result.best_validation_recall) {
        result.best_validation_recall = recall;
        result.best_epoch = epoch;
        result.best = capture_checkpoint(model, &adam, epoch, data.stats_hash, config_text);
        if (!options.out_dir.empty()) save_checkpoint(result.best, options.out_dir / "best.ckpt");
      }
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log_file.is_open()) {
      log_file << log.epoch << ',' << log.loss << ',' << log.retrieval_loss << ','
               << log.rank_loss << ',' << log.loss_sum << ','
               << (log.validation_recall ? std::to_string(*log.validation_recall) : "") << ','
               << log.seconds << '\n';
      log_file.flush();
    }
    if (options.on_epoch) options.on_epoch(log);
    result.log.push_back(log);
  }

  const Checkpoint final_ckpt =
      capture_checkpoint(model, &adam, cfg.epochs, data.stats_hash, config_text);
  if (!options.out_dir.empty()) save_checkpoint(final_ckpt, options.out_dir / "last.ckpt");
  if (!result.best_validation_recall) {
    result.best = final_ckpt;
    result.best_epoch = cfg.epochs;
    if (!options.out_dir.empty()) save_checkpoint(result.best, options.out_dir / "best.ckpt");
  }
  return result;
}

}  // namespace sessionrec
