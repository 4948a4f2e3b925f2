#include "convmf/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "convmf/topics.hpp"

namespace convmf {

std::string provenance_name(Provenance p) {
    switch (p) {
        case Provenance::PaperFixed: return "paper-fixed";
        case Provenance::ArtifactDefault: return "artifact-default";
        case Provenance::UserSet: return "user-set";
    }
    throw ConfigError("unknown provenance");
}

std::map<std::string, Provenance> TrainConfig::default_provenance() {
    // window and review_length are fixed upstream choices; the lambda and
    // n_factors grids come from upstream too, but the specific default cell
    // is ours, as is everything the source leaves open.
    return {
        {"n_factors", Provenance::ArtifactDefault},
        {"lambda", Provenance::ArtifactDefault},
        {"window", Provenance::PaperFixed},
        {"review_length", Provenance::PaperFixed},
        {"batch_size", Provenance::ArtifactDefault},
        {"epochs", Provenance::ArtifactDefault},
        {"step_size", Provenance::ArtifactDefault},
        {"weight_decay", Provenance::ArtifactDefault},
        {"seed", Provenance::ArtifactDefault},
        {"mask_pad", Provenance::ArtifactDefault},
        {"freeze_embeddings", Provenance::ArtifactDefault},
        {"patience", Provenance::ArtifactDefault},
        {"max_reviews_per_item", Provenance::ArtifactDefault},
        {"use_global_mean", Provenance::ArtifactDefault},
    };
}

void TrainConfig::mark_user_set(const std::string& field) {
    auto it = provenance.find(field);
    if (it == provenance.end()) throw ConfigError("unknown config field: " + field);
    it->second = Provenance::UserSet;
}

void TrainConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (n_factors < 1) throw ConfigError("n_factors must be >= 1");
    if (window > review_length) throw ConfigError("window must not exceed review length");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (step_size <= 0.0) throw ConfigError("step_size must be positive");
}

std::string TrainConfig::to_json() const {
    nlohmann::json j;
    j["n_factors"] = n_factors;
    j["lambda"] = lambda;
    j["window"] = window;
    j["review_length"] = review_length;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["step_size"] = step_size;
    j["weight_decay"] = weight_decay;
    j["seed"] = seed;
    j["mask_pad"] = mask_pad;
    j["freeze_embeddings"] = freeze_embeddings;
    j["patience"] = patience;
    j["max_reviews_per_item"] = max_reviews_per_item;
    j["use_global_mean"] = use_global_mean;
    nlohmann::json prov;
    for (const auto& [field, p] : provenance) prov[field] = provenance_name(p);
    j["provenance"] = std::move(prov);
    return j.dump();
}

std::string history_to_csv(const RunHistory& history) {
    // seconds carries wall time and is the one column two identical runs may
    // disagree on; byte-level comparisons should mask it.
    std::string out = "epoch,train_total,train_rmse,train_entropy_bits,val_rmse,seconds\n";
    for (const auto& e : history.epochs) {
        out += std::to_string(e.epoch);
        out += ',';
        out += format_double(e.train_total);
        out += ',';
        out += format_double(e.train_rmse);
        out += ',';
        out += format_double(e.train_entropy_bits);
        out += ',';
        out += format_double(e.validation_rmse);
        out += ',';
        out += format_double(e.seconds);
        out += '\n';
    }
    return out;
}

namespace {

// Adaptive-moments state for one parameter vector.
class AdamState {
public:
    explicit AdamState(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grads, double lr, double decay,
              std::size_t t) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1 * m_[i] + (1.0 - beta1) * grads[i];
            v_[i] = beta2 * v_[i] + (1.0 - beta2) * grads[i] * grads[i];
            const double mhat = m_[i] / c1;
            const double vhat = v_[i] / c2;
            params[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + decay * params[i]);
        }
    }

private:
    std::vector<double> m_;
    std::vector<double> v_;
};

double validation_rmse(const ModelParams& params, const ItemEmbeddingCache& cache,
                       const TokenizedCorpus& corpus, const std::vector<std::size_t>& ids) {
    if (ids.empty()) return 0.0;
    double sq = 0.0;
    for (std::size_t id : ids) {
        const auto& review = corpus.records[id].review;
        const double pred =
            clamp_rating(predict_rating(review.user_index, review.item_index, params, cache));
        const double e = pred - review.rating;
        sq += e * e;
    }
    return std::sqrt(sq / static_cast<double>(ids.size()));
}

Checkpoint make_convmf_checkpoint(const ModelParams& params, const TokenizedCorpus& corpus,
                                  const EmbeddingTable& embeddings, const TrainConfig& config) {
    Checkpoint ckpt;
    ckpt.kind = ModelKind::ConvMf;
    ckpt.vocab_hash = corpus.vocab_hash;
    ckpt.embedding_source = embeddings.source;
    ckpt.config_echo = config.to_json();
    ckpt.global_mean = params.global_mean;
    ckpt.lambda = config.lambda;
    ckpt.user_factors = params.user_factors;
    ckpt.filters = params.filters;
    if (!config.freeze_embeddings) ckpt.embeddings = embeddings.vectors;
    return ckpt;
}

}  // namespace

TrainResult train_convmf(const TrainConfig& config, const TokenizedCorpus& corpus,
                         const EmbeddingTable& embeddings) {
    config.validate();
    if (corpus.review_length != config.review_length)
        throw ConsistencyError("corpus review length " + std::to_string(corpus.review_length) +
                               " does not match config " + std::to_string(config.review_length));

    // Working copy of the embedding table when fine-tuning is enabled.
    EmbeddingTable tuned;
    const bool tune_embeddings = !config.freeze_embeddings;
    if (tune_embeddings) tuned = embeddings;
    const EmbeddingTable& table = tune_embeddings ? tuned : embeddings;

    ModelParams params = init_model_params(corpus.n_users(), config.n_factors, config.window,
                                           table.dimension, config.lambda, config.seed);
    params.global_mean = config.use_global_mean ? corpus.train_mean_rating() : 0.0;

    const auto by_item = corpus.train_records_by_item();
    const auto val_ids = corpus.record_ids(Split::Validation);

    std::vector<std::uint32_t> items;
    for (std::uint32_t i = 0; i < corpus.n_items(); ++i)
        if (!by_item[i].empty()) items.push_back(i);
    if (items.empty()) throw ConfigError("train_convmf: no items with training reviews");

    TrainResult result;
    {
        ItemEmbeddingCache cache = build_item_cache(params, corpus, table);
        result.history.initial_validation_rmse = validation_rmse(params, cache, corpus, val_ids);
    }
    result.history.best_epoch = 0;
    result.history.best_validation_rmse = result.history.initial_validation_rmse;
    result.checkpoint = make_convmf_checkpoint(params, corpus, table, config);

    AdamState adam_users(params.user_factors.size());
    AdamState adam_weights(params.filters.weights.size());
    AdamState adam_bias(params.filters.bias.size());
    std::optional<AdamState> adam_embeddings;
    if (tune_embeddings) adam_embeddings.emplace(tuned.vectors.size());

    std::size_t adam_t = 0;
    std::size_t epochs_since_best = 0;

    BatchLossOptions loss_options;
    loss_options.lambda = config.lambda;
    loss_options.mask_pad = config.mask_pad;
    loss_options.max_reviews_per_item = config.max_reviews_per_item;
    loss_options.embedding_grads = tune_embeddings;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng epoch_rng(derive_seed(config.seed, 0xE90C000ULL + epoch));
        epoch_rng.shuffle(items);
        loss_options.review_sample_seed = derive_seed(config.seed, 0x5A3B000ULL + epoch);

        double epoch_sq = 0.0;
        std::size_t epoch_ratings = 0;
        double epoch_entropy = 0.0;
        std::size_t epoch_rows = 0;
        bool finite = true;

        for (std::size_t start = 0; start < items.size() && finite;
             start += config.batch_size) {
            const std::size_t end = std::min(items.size(), start + config.batch_size);
            std::span<const std::uint32_t> batch(items.data() + start, end - start);

            BatchGradients grads;
            LossBreakdown breakdown;
            try {
                breakdown = model_batch_loss(batch, corpus, by_item, table, params, loss_options,
                                             &grads);
            } catch (const NumericError&) {
                finite = false;
                break;
            }
            if (!std::isfinite(breakdown.total)) {
                finite = false;
                break;
            }

            const std::size_t n_ratings =
                [&] {
                    std::size_t n = 0;
                    for (std::uint32_t item : batch) n += by_item[item].size();
                    return n;
                }();
            epoch_sq += breakdown.rmse_term * breakdown.rmse_term * static_cast<double>(n_ratings);
            epoch_ratings += n_ratings;
            const std::size_t rows = breakdown.n_reviews * breakdown.n_factors;
            epoch_entropy += breakdown.entropy_term_bits * static_cast<double>(rows);
            epoch_rows += rows;

            ++adam_t;
            adam_users.step(params.user_factors.data(), grads.user_factors.data(),
                            config.step_size, config.weight_decay, adam_t);
            adam_weights.step(params.filters.weights, grads.filters.weights, config.step_size,
                              config.weight_decay, adam_t);
            adam_bias.step(params.filters.bias, grads.filters.bias, config.step_size, 0.0, adam_t);
            if (tune_embeddings && grads.embeddings)
                adam_embeddings->step(tuned.vectors.data(), grads.embeddings->data(),
                                      config.step_size, 0.0, adam_t);
            ++params.revision;
        }

        if (!finite) {
            // Abort, handing back the last checkpoint that was still good.
            result.aborted_non_finite = true;
            return result;
        }

        ItemEmbeddingCache cache = build_item_cache(params, corpus, table);
        const double val = validation_rmse(params, cache, corpus, val_ids);
        const auto t1 = std::chrono::steady_clock::now();

        EpochLog log;
        log.epoch = epoch;
        log.train_rmse = std::sqrt(epoch_sq / static_cast<double>(epoch_ratings));
        log.train_entropy_bits = epoch_entropy / static_cast<double>(epoch_rows);
        log.train_total = log.train_rmse + config.lambda * log.train_entropy_bits;
        log.validation_rmse = val;
        log.seconds = std::chrono::duration<double>(t1 - t0).count();
        result.history.epochs.push_back(log);

        // Without a validation split every epoch counts as an improvement
        // (no early stopping, final params win).
        if (val_ids.empty() || val < result.history.best_validation_rmse) {
            result.history.best_validation_rmse = val;
            result.history.best_epoch = epoch;
            result.checkpoint = make_convmf_checkpoint(params, corpus, table, config);
            epochs_since_best = 0;
        } else if (++epochs_since_best > config.patience) {
            break;
        }
    }
    return result;
}

double evaluate_rmse(const Checkpoint& ckpt, const TokenizedCorpus& corpus, Split split,
                     const EmbeddingTable* embeddings) {
    const auto ids = corpus.record_ids(split);
    if (ids.empty()) throw ConfigError("evaluate_rmse: empty split");

    auto rmse_over = [&](auto&& predict) {
        double sq = 0.0;
        for (std::size_t id : ids) {
            const auto& review = corpus.records[id].review;
            const double pred = clamp_rating(predict(review));
            const double e = pred - review.rating;
            sq += e * e;
        }
        return std::sqrt(sq / static_cast<double>(ids.size()));
    };

    switch (ckpt.kind) {
        case ModelKind::Offset:
            return rmse_over([&](const TokenizedReview&) { return ckpt.global_mean; });
        case ModelKind::Pmf: {
            PmfParams params;
            params.user_factors = ckpt.user_factors;
            params.item_factors = ckpt.item_factors;
            params.global_mean = ckpt.global_mean;
            return rmse_over([&](const TokenizedReview& r) {
                return pmf_predict(params, r.user_index, r.item_index);
            });
        }
        case ModelKind::ConvMf: {
            if (!embeddings) throw ConfigError("evaluate_rmse: convmf needs an embedding table");
            verify_checkpoint_corpus(ckpt, corpus);
            EmbeddingTable table = *embeddings;  // checkpoint may carry tuned vectors
            if (ckpt.embeddings) {
                if (ckpt.embeddings->rows() != table.vectors.rows() ||
                    ckpt.embeddings->cols() != table.vectors.cols())
                    throw ConsistencyError("checkpoint embedding shape does not match table");
                table.vectors = *ckpt.embeddings;
            }
            ModelParams params;
            params.user_factors = ckpt.user_factors;
            params.filters = ckpt.filters;
            params.global_mean = ckpt.global_mean;
            params.lambda = ckpt.lambda;
            const ItemEmbeddingCache cache = build_item_cache(params, corpus, table);
            return rmse_over([&](const TokenizedReview& r) {
                return predict_rating(r.user_index, r.item_index, params, cache);
            });
        }
    }
    throw ConfigError("evaluate_rmse: unknown checkpoint kind");
}

GridResult run_grid(const TrainConfig& base, const std::vector<double>& lambdas,
                    const std::vector<std::size_t>& factor_counts, const TokenizedCorpus& corpus,
                    const Vocabulary& vocabulary, const EmbeddingTable& embeddings,
                    std::size_t top_k, std::uint32_t min_occurrences) {
    if (lambdas.empty() || factor_counts.empty())
        throw ConfigError("run_grid: lambda and factor lists must be non-empty");
    GridResult grid;
    for (std::size_t f : factor_counts) {
        for (double lambda : lambdas) {
            GridCell cell;
            cell.lambda = lambda;
            cell.n_factors = f;
            try {
                TrainConfig config = base;
                config.lambda = lambda;
                config.n_factors = f;
                const TrainResult run = train_convmf(config, corpus, embeddings);
                if (run.aborted_non_finite)
                    throw NumericError("training aborted on non-finite loss");
                cell.test_rmse = evaluate_rmse(run.checkpoint, corpus, Split::Test, &embeddings);

                const WordActivationStats stats =
                    accumulate_word_activations(run.checkpoint, corpus, embeddings);
                const TopicReport report =
                    build_topic_report(stats, vocabulary, embeddings, top_k, min_occurrences);
                if (report.overall_coherence) cell.coherence = *report.overall_coherence;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            grid.cells.push_back(std::move(cell));
        }
    }
    return grid;
}

std::string grid_to_json(const GridResult& grid) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : grid.cells) {
        nlohmann::json j;
        j["lambda"] = cell.lambda;
        j["n_factors"] = cell.n_factors;
        j["rmse"] = cell.test_rmse ? nlohmann::json(*cell.test_rmse) : nlohmann::json(nullptr);
        j["coherence"] = cell.coherence ? nlohmann::json(*cell.coherence) : nlohmann::json(nullptr);
        if (!cell.error.empty()) j["error"] = cell.error;
        cells.push_back(std::move(j));
    }
    nlohmann::json out;
    out["cells"] = std::move(cells);
    return out.dump(2) + "\n";
}

}  // namespace convmf
