#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "convmf/corpus.hpp"
#include "convmf/embeddings.hpp"
#include "convmf/model.hpp"

namespace convmf {

// Per-factor word activation tallies: each window's activation is split
// evenly across the window's w words, PAD and UNK positions excluded.
struct WordActivationStats {
    std::size_t n_factors = 0;
    std::size_t window = 0;
    // [factor][token] -> accumulated mass / membership count; token-indexed.
    std::vector<std::vector<double>> activation_sum;
    std::vector<std::vector<std::uint32_t>> occurrence_count;
};

// Sweeps the training split with the checkpoint's filters. Throws on a
// vocabulary hash mismatch between checkpoint and corpus.
WordActivationStats accumulate_word_activations(const Checkpoint& ckpt,
                                                const TokenizedCorpus& corpus,
                                                const EmbeddingTable& embeddings);

struct Keyword {
    std::uint32_t token = 0;
    double mean_activation = 0.0;
    std::uint32_t count = 0;
};

// Top k tokens by mean activation (ties: token string ascending); tokens seen
// fewer than min_occurrences times are ineligible. May return fewer than k.
std::vector<Keyword> top_k_keywords(const WordActivationStats& stats, const Vocabulary& vocabulary,
                                    std::size_t factor, std::size_t k = 10,
                                    std::uint32_t min_occurrences = 5);

struct CoherenceResult {
    std::optional<double> coherence;  // empty when fewer than 2 usable keywords
    std::size_t skipped_pairs = 0;    // pairs with a non-pretrained or zero vector member
};

// Mean pairwise cosine similarity over keyword pairs whose members both have
// pretrained vectors.
CoherenceResult topic_coherence(std::span<const Keyword> keywords, const EmbeddingTable& embeddings);

struct FactorTopic {
    std::size_t factor = 0;
    std::vector<Keyword> keywords;
    std::optional<double> coherence;
    std::size_t skipped_pairs = 0;
};

struct TopicReport {
    std::vector<FactorTopic> factors;  // sorted by coherence descending, undefined last
    std::optional<double> overall_coherence;
    std::size_t skipped_pairs = 0;
    std::size_t excluded_factors = 0;
    std::size_t top_k = 0;
};

TopicReport build_topic_report(const WordActivationStats& stats, const Vocabulary& vocabulary,
                               const EmbeddingTable& embeddings, std::size_t k = 10,
                               std::uint32_t min_occurrences = 5);

// JSON rendering; config_echo is inserted verbatim under "config".
std::string topic_report_to_json(const TopicReport& report, const Vocabulary& vocabulary,
                                 const std::string& config_echo);

}  // namespace convmf
