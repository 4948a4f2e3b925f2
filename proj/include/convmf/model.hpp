#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "convmf/corpus.hpp"
#include "convmf/embeddings.hpp"
#include "convmf/numerics.hpp"

namespace convmf {

// Learned state: a user factor matrix, the convolution filter bank that
// turns review text into item embeddings, and the fixed training-mean
// rating. `revision` bumps on every parameter update so caches can detect
// staleness.
struct ModelParams {
    Matrix user_factors;  // n_users x F
    FilterBank filters;
    double global_mean = 0.0;
    double lambda = 0.0;
    std::uint64_t revision = 0;

    std::size_t n_factors() const { return filters.n_filters; }
};

ModelParams init_model_params(std::size_t n_users, std::size_t n_factors, std::size_t window,
                              std::size_t dim, double lambda, std::uint64_t seed);

struct ReviewEmbedding {
    std::vector<double> pooled;       // F values, the item-side embedding of one review
    std::vector<std::size_t> argmax;  // winning window per filter
    ActivationMap map;
};

// conv -> max-pool per filter, per Fig.-style pipeline: pool per review,
// average across the item's reviews afterwards.
ReviewEmbedding review_embedding(const TokenizedReview& review, const EmbeddingTable& embeddings,
                                 const FilterBank& filters);

// Mean of review_embedding over the item's training reviews; zero vector for
// items with no training reviews (prediction then degenerates to the mean).
std::vector<double> item_embedding(std::uint32_t item,
                                   const std::vector<std::vector<std::size_t>>& train_by_item,
                                   const TokenizedCorpus& corpus, const EmbeddingTable& embeddings,
                                   const FilterBank& filters);

struct ItemEmbeddingCache {
    Matrix vectors;  // n_items x F
    std::vector<std::size_t> review_counts;
    std::uint64_t params_revision = 0;
};

ItemEmbeddingCache build_item_cache(const ModelParams& params, const TokenizedCorpus& corpus,
                                    const EmbeddingTable& embeddings);

// mu + u . v; unknown user or cold item falls back toward mu. Unclamped;
// evaluation clamps to the rating range itself. Throws on a stale cache.
double predict_rating(std::uint32_t user, std::uint32_t item, const ModelParams& params,
                      const ItemEmbeddingCache& cache);

inline double clamp_rating(double r) { return r < 1.0 ? 1.0 : (r > 5.0 ? 5.0 : r); }

struct BatchGradients {
    Matrix user_factors;
    FilterBank filters;
    std::optional<Matrix> embeddings;  // |V| x D, present when embedding grads requested
};

struct BatchLossOptions {
    double lambda = 0.0;
    bool mask_pad = false;
    std::size_t max_reviews_per_item = 0;  // 0 = use all
    std::uint64_t review_sample_seed = 0;
    bool embedding_grads = false;
};

// Composite loss over a batch of items: RMSE over every training rating of
// the batch items plus lambda times the mean entropy over N x F activation
// rows, N counting the batch's processed reviews. Item embeddings are
// recomputed here (not read from a cache) so gradients reach the filters.
LossBreakdown model_batch_loss(std::span<const std::uint32_t> batch_items,
                               const TokenizedCorpus& corpus,
                               const std::vector<std::vector<std::size_t>>& train_by_item,
                               const EmbeddingTable& embeddings, const ModelParams& params,
                               const BatchLossOptions& options, BatchGradients* grads);

// --- checkpoint container ----------------------------------------------------

enum class ModelKind : std::uint8_t { Offset = 0, Pmf = 1, ConvMf = 2 };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct Checkpoint {
    ModelKind kind = ModelKind::ConvMf;
    std::uint64_t vocab_hash = 0;
    std::string embedding_source;
    std::string config_echo;  // JSON text, written at save time
    double global_mean = 0.0;
    double lambda = 0.0;

    Matrix user_factors;               // pmf + convmf
    FilterBank filters;                // convmf
    Matrix item_factors;               // pmf
    std::optional<Matrix> embeddings;  // convmf with fine-tuned embeddings
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Refuses checkpoints built against a different vocabulary.
void verify_checkpoint_corpus(const Checkpoint& ckpt, const TokenizedCorpus& corpus);

}  // namespace convmf
