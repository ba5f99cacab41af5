#include "sessionrec/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "sessionrec/checkpoint.hpp"
#include "sessionrec/hash.hpp"
#include "sessionrec/sequence_encoder.hpp"
#include "sessionrec/trainer.hpp"

namespace sessionrec {

namespace {

std::string alpha_label(double a) {
  std::ostringstream s;
  s << a;
  return s.str();
}

std::unique_ptr<Model<float>> model_from(const Checkpoint& ckpt) {
  auto m = std::make_unique<Model<float>>(ckpt.model, 0);
  restore_model(*m, ckpt);
  return m;
}

}  // namespace

std::vector<AlphaRow> alpha_sweep(const ProcessedDataset& data, const TrainConfig& cfg,
                                  const std::vector<double>& alphas, Protocol protocol,
                                  const std::filesystem::path& out_dir) {
  if (alphas.empty()) throw std::invalid_argument("alpha_sweep: no alphas given");
  const TrainingSet train_set = make_training_set(data);
  const Catalog catalog = make_catalog(data);
  const DatasetSplit split = make_split(data, protocol);
  std::vector<AlphaRow> rows;
  for (double a : alphas) {
    AlphaRow row;
    row.alpha = a;
    try {
      TrainConfig c = cfg;
      c.loss.alpha = a;
      TrainOptions opts;
      if (!out_dir.empty()) opts.out_dir = out_dir / ("alpha_" + alpha_label(a));
      const TrainResult result = train(train_set, c, opts);
      const auto model = model_from(result.best);
      EvalOptions eo;
      eo.threads = cfg.threads;
      row.report = evaluate(*model, catalog, split, eo);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string alpha_table_csv(const std::vector<AlphaRow>& rows) {
  std::ostringstream out;
  out.precision(std::numeric_limits<double>::max_digits10);
  std::vector<std::size_t> cutoffs;
  for (const auto& r : rows) {
    if (r.report) {
      cutoffs = r.report->cutoffs;
      break;
    }
  }
  out << "alpha";
  for (auto k : cutoffs) out << ",recall@" << k << ",ndcg@" << k;
  out << ",error\n";
  for (const auto& r : rows) {
    out << r.alpha;
    for (std::size_t i = 0; i < cutoffs.size(); ++i) {
      if (r.report) {
        out << ',' << r.report->recall[i] << ',' << r.report->ndcg[i];
      } else {
        out << ",,";
      }
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << ',' << err << '\n';
  }
  return out.str();
}

std::vector<ScalingRow> scaling_run(const ProcessedDataset& data, const TrainConfig& cfg,
                                    const std::vector<double>& fractions, std::size_t recall_k) {
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw std::invalid_argument("scaling_run: fraction " + alpha_label(f) +
                                  " outside (0, 1]");
    }
  }
  const DatasetSplit split = make_split(data, Protocol::leave_one_session_out);
  const Catalog catalog = make_catalog(data);

  std::vector<std::int64_t> starts;
  for (const auto& u : split.users) {
    for (const auto& s : u.train_view.sessions) starts.push_back(s.items.front().timestamp);
  }
  std::sort(starts.begin(), starts.end());

  std::vector<EvalCase> cases;
  for (const auto& u : split.users) cases.push_back({&u.train_view, &u.test_target});

  std::vector<ScalingRow> rows;
  for (double f : fractions) {
    ScalingRow row;
    row.fraction = f;
    try {
      if (starts.empty()) throw TrainingError("no training sessions");
      const auto idx = static_cast<std::size_t>(
          std::ceil(f * static_cast<double>(starts.size())) - 1.0);
      const std::int64_t cutoff = starts[std::min(idx, starts.size() - 1)];
      TrainingSet ts;
      ts.catalog = catalog;
      ts.features = feature_specs(data.schema);
      ts.stats_hash = fnv1a64(stats_json(data.stats));
      for (const auto& u : split.users) {
        SessionizedSequence h;
        h.user_id = u.user_id;
        for (const auto& s : u.train_view.sessions) {
          if (s.items.front().timestamp > cutoff) break;
          h.sessions.push_back(s);
          row.train_items += s.items.size();
        }
        if (!h.sessions.empty()) ts.histories.push_back(std::move(h));
      }
      const TrainResult result = train(ts, cfg);
      const auto model = model_from(result.best);
      EvalOptions eo;
      eo.cutoffs = {recall_k};
      eo.threads = cfg.threads;
      const CaseMetrics m = evaluate_cases(*model, model->item_vectors(catalog), cases, eo);
      double recall = 0.0;
      for (double r : m.recall) recall += r;
      row.recall = m.recall.empty() ? 0.0 : recall / static_cast<double>(m.recall.size());
    } catch (const std::exception& e) {
      row.skipped = true;
      row.note = e.what();
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ScalingRow& a, const ScalingRow& b) {
    return a.train_items < b.train_items;
  });
  return rows;
}

std::string scaling_table_csv(const std::vector<ScalingRow>& rows) {
  std::ostringstream out;
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "fraction,train_items,log10_train_items,recall@500,status\n";
  for (const auto& r : rows) {
    out << r.fraction << ',' << r.train_items << ',';
    if (r.train_items > 0) out << std::log10(static_cast<double>(r.train_items));
    out << ',';
    if (r.recall) out << *r.recall;
    std::string note = r.note;
    std::replace(note.begin(), note.end(), ',', ';');
    out << ',' << (r.skipped ? "skipped: " + note : "ok") << '\n';
  }
  return out.str();
}

std::string ComplexityResult::to_json() const {
  nlohmann::ordered_json j;
  j["n_items"] = n_items;
  j["session_len"] = session_len;
  j["item_level_pairs"] = item_level_pairs;
  j["session_level_pairs"] = session_level_pairs;
  j["pair_ratio"] = pair_ratio;
  j["measured_item_pairs"] = measured_item_pairs;
  j["measured_session_pairs"] = measured_session_pairs;
  j["item_seconds"] = item_seconds;
  j["session_seconds"] = session_seconds;
  j["time_ratio"] = time_ratio;
  return j.dump(2);
}

ComplexityResult complexity_bench(std::size_t n_items, std::size_t session_len,
                                  const BenchOptions& options) {
  if (n_items == 0 || session_len == 0 || n_items % session_len != 0) {
    throw std::invalid_argument("complexity_bench: session length " +
                                std::to_string(session_len) + " must divide " +
                                std::to_string(n_items));
  }
  ComplexityResult r;
  r.n_items = n_items;
  r.session_len = session_len;
  const std::uint64_t n = n_items;
  const std::uint64_t m = n_items / session_len;
  r.item_level_pairs = n * n;
  r.session_level_pairs = m * m;
  r.pair_ratio = static_cast<double>(r.item_level_pairs) / static_cast<double>(r.session_level_pairs);

  SseConfig sc;
  sc.backbone = SseBackbone::causal_attention;
  sc.layers = options.layers;
  sc.heads = options.heads;
  sc.dropout = 0.0;
  sc.max_positions = n_items;
  ParameterSet<float> params;
  std::mt19937_64 rng(options.seed);
  const SequenceEncoder<float> sse(sc, options.d, params, rng);

  auto tokens = [&](std::size_t rows) {
    Tensor<float> t(rows, options.d);
    std::normal_distribution<float> dist(0.0f, 1.0f);
    for (auto& v : t.values()) v = dist(rng);
    return t;
  };
  const Tensor<float> item_tokens = tokens(n_items);
  const Tensor<float> session_tokens = tokens(m);
  const std::uint64_t per_pass = options.heads * options.layers;

  auto time_forward = [&](const Tensor<float>& x, std::uint64_t& pairs) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t rep = 0; rep < std::max<std::size_t>(options.repetitions, 1); ++rep) {
      Graph<float> g(false);
      const auto t0 = std::chrono::steady_clock::now();
      sse.encode_sequence(g, g.constant(x), ForwardContext{});
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
      pairs = g.stats().attention_pairs / per_pass;
    }
    return best;
  };
  r.item_seconds = time_forward(item_tokens, r.measured_item_pairs);
  r.session_seconds = time_forward(session_tokens, r.measured_session_pairs);
  r.time_ratio = r.item_seconds / r.session_seconds;
  return r;
}

}  // namespace sessionrec
