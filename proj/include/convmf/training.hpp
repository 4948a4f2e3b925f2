#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convmf/baselines.hpp"
#include "convmf/corpus.hpp"
#include "convmf/embeddings.hpp"
#include "convmf/model.hpp"

namespace convmf {

// Where a config value came from; recorded per field in the run manifest so
// fixed choices are distinguishable from our defaults and from CLI input.
enum class Provenance : std::uint8_t { PaperFixed, ArtifactDefault, UserSet };

std::string provenance_name(Provenance p);

struct TrainConfig {
    std::size_t n_factors = 8;
    double lambda = 0.0;
    std::size_t window = 5;
    std::size_t review_length = 64;
    std::size_t batch_size = 32;  // items per batch
    std::size_t epochs = 30;
    double step_size = 1e-3;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
    bool mask_pad = false;
    bool freeze_embeddings = true;
    std::size_t patience = 5;
    std::size_t max_reviews_per_item = 0;  // 0 = all
    bool use_global_mean = true;

    std::map<std::string, Provenance> provenance = default_provenance();

    static std::map<std::string, Provenance> default_provenance();
    void mark_user_set(const std::string& field);
    void validate() const;
    std::string to_json() const;  // config echo with provenance
};

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double train_total = 0.0;
    double train_rmse = 0.0;
    double train_entropy_bits = 0.0;
    double validation_rmse = 0.0;
    double seconds = 0.0;
};

struct RunHistory {
    double initial_validation_rmse = 0.0;
    std::vector<EpochLog> epochs;
    std::size_t best_epoch = 0;  // 0 = the initialized model
    double best_validation_rmse = 0.0;
};

// Wall time is deliberately absent from the comparable content; see
// history_to_csv.
std::string history_to_csv(const RunHistory& history);

struct TrainResult {
    Checkpoint checkpoint;  // best epoch by validation RMSE
    RunHistory history;
    bool aborted_non_finite = false;  // checkpoint then holds the last good state
};

// Mini-batch training over item batches with adaptive-moment updates
// (0.9/0.999, eps 1e-8) and decoupled L2 decay on user factors and filter
// weights. Deterministic for a fixed (config, corpus, embeddings).
TrainResult train_convmf(const TrainConfig& config, const TokenizedCorpus& corpus,
                         const EmbeddingTable& embeddings);

// RMSE of clamped predictions over a split. The split must not feed item
// embeddings: those always come from training-split reviews.
double evaluate_rmse(const Checkpoint& ckpt, const TokenizedCorpus& corpus, Split split,
                     const EmbeddingTable* embeddings);

struct GridCell {
    double lambda = 0.0;
    std::size_t n_factors = 0;
    std::optional<double> test_rmse;
    std::optional<double> coherence;
    std::string error;  // non-empty when the cell failed
};

struct GridResult {
    std::vector<GridCell> cells;
};

// One train/evaluate/topic run per (lambda, n_factors) pair, shared seed.
// A failing cell records its error and the grid continues.
GridResult run_grid(const TrainConfig& base, const std::vector<double>& lambdas,
                    const std::vector<std::size_t>& factor_counts, const TokenizedCorpus& corpus,
                    const Vocabulary& vocabulary, const EmbeddingTable& embeddings,
                    std::size_t top_k = 10, std::uint32_t min_occurrences = 5);

std::string grid_to_json(const GridResult& grid);

}  // namespace convmf
