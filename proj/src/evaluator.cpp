#include "sessionrec/evaluator.hpp"

#include <algorithm>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sessionrec/checkpoint.hpp"
#include "sessionrec/metrics.hpp"

namespace sessionrec {

namespace {

std::size_t cutoff_index(const std::vector<std::size_t>& cutoffs, std::size_t k) {
  const auto it = std::find(cutoffs.begin(), cutoffs.end(), k);
  if (it == cutoffs.end()) throw std::out_of_range("report has no cutoff " + std::to_string(k));
  return static_cast<std::size_t>(it - cutoffs.begin());
}

}  // namespace

double EvalReport::recall_at(std::size_t k) const { return recall[cutoff_index(cutoffs, k)]; }
double EvalReport::ndcg_at(std::size_t k) const { return ndcg[cutoff_index(cutoffs, k)]; }

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["protocol"] = protocol;
  j["num_users"] = num_users;
  j["catalog_size"] = catalog_size;
  j["config_hash"] = config_hash;
  j["ndcg_relevance"] = "binary; ideal DCG over min(K, |targets|) hits";
  j["recall_denominator"] = "|targets|";
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    metrics["recall@" + std::to_string(cutoffs[i])] = recall[i];
    metrics["ndcg@" + std::to_string(cutoffs[i])] = ndcg[i];
  }
  j["metrics"] = metrics;
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << "protocol " << protocol << ", " << num_users << " users, " << catalog_size << " items\n";
  out << "NDCG uses binary relevance; Recall divides by the number of targets\n";
  out << std::left << std::setw(8) << "K" << std::right << std::setw(12) << "Recall"
      << std::setw(12) << "NDCG" << "\n";
  out << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    out << std::left << std::setw(8) << cutoffs[i] << std::right << std::setw(12) << recall[i]
        << std::setw(12) << ndcg[i] << "\n";
  }
  return out.str();
}

CaseMetrics evaluate_cases(const Model<float>& model, const Tensor<float>& item_vecs,
                           std::span<const EvalCase> cases, const EvalOptions& options) {
  if (options.cutoffs.empty()) throw std::invalid_argument("evaluate: no cutoffs");
  const std::size_t nk = options.cutoffs.size();
  const std::size_t catalog = item_vecs.rows();
  const std::size_t depth =
      std::min(catalog, *std::max_element(options.cutoffs.begin(), options.cutoffs.end()));
  CaseMetrics out;
  out.recall.assign(cases.size() * nk, 0.0);
  out.ndcg.assign(cases.size() * nk, 0.0);

  auto run = [&](std::size_t begin, std::size_t stride) {
    std::vector<float> scores(catalog);
    for (std::size_t c = begin; c < cases.size(); c += stride) {
      const Tensor<float> u = model.user_vector(*cases[c].history);
      const auto uv = u.row(0);
      for (std::size_t i = 0; i < catalog; ++i) {
        const auto v = item_vecs.row(i);
        float s = 0.0f;
        for (std::size_t k = 0; k < v.size(); ++k) s += uv[k] * v[k];
        scores[i] = s;
      }
      const auto ranked = top_k(std::span<const float>(scores), depth);
      for (std::size_t k = 0; k < nk; ++k) {
        out.recall[c * nk + k] = recall_at_k(ranked, *cases[c].targets, options.cutoffs[k]);
        out.ndcg[c * nk + k] = ndcg_at_k(ranked, *cases[c].targets, options.cutoffs[k]);
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, cases.size()));
  if (threads == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          run(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return out;
}

EvalReport evaluate(const Model<float>& model, const Catalog& catalog, const DatasetSplit& split,
                    const EvalOptions& options) {
  if (catalog.size != split.catalog_size || catalog.size != model.config().embedding.num_items) {
    throw std::invalid_argument("evaluate: catalog mismatch (model " +
                                std::to_string(model.config().embedding.num_items) +
                                " items, dataset " + std::to_string(split.catalog_size) + ")");
  }
  const Tensor<float> item_vecs = model.item_vectors(catalog);
  std::vector<EvalCase> cases;
  cases.reserve(split.users.size());
  for (const auto& u : split.users) cases.push_back({&u.train_view, &u.test_target});
  const CaseMetrics m = evaluate_cases(model, item_vecs, cases, options);

  EvalReport r;
  r.protocol = std::string(protocol_name(split.protocol));
  r.cutoffs = options.cutoffs;
  r.num_users = cases.size();
  r.catalog_size = catalog.size;
  r.config_hash = config_hash(model.config());
  const std::size_t nk = r.cutoffs.size();
  r.recall.assign(nk, 0.0);
  r.ndcg.assign(nk, 0.0);
  // Fixed summation order: users as listed in the split (sorted by user id).
  for (std::size_t c = 0; c < cases.size(); ++c) {
    for (std::size_t k = 0; k < nk; ++k) {
      r.recall[k] += m.recall[c * nk + k];
      r.ndcg[k] += m.ndcg[c * nk + k];
    }
  }
  if (!cases.empty()) {
    for (std::size_t k = 0; k < nk; ++k) {
      r.recall[k] /= static_cast<double>(cases.size());
      r.ndcg[k] /= static_cast<double>(cases.size());
    }
  }
  return r;
}

EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint,
                               const ProcessedDataset& data, Protocol protocol,
                               const EvalOptions& options) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto& emb = ckpt.model.embedding;
  const auto specs = feature_specs(data.schema);
  bool same_features = specs.size() == emb.features.size();
  for (std::size_t i = 0; same_features && i < specs.size(); ++i) {
    same_features = specs[i].name == emb.features[i].name &&
                    specs[i].cardinality == emb.features[i].cardinality;
  }
  if (emb.num_items != data.catalog_size || !same_features) {
    throw std::invalid_argument("evaluate: checkpoint was trained on a different catalog (" +
                                std::to_string(emb.num_items) + " items vs " +
                                std::to_string(data.catalog_size) + " in the dataset)");
  }
  Model<float> model(ckpt.model, 0);
  restore_model(model, ckpt);
  return evaluate(model, make_catalog(data), make_split(data, protocol), options);
}

}  // namespace sessionrec
