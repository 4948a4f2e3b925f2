#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "convmf/common.hpp"
#include "convmf/corpus.hpp"

namespace convmf {

// Word vectors aligned to a vocabulary, one row per token index. Rows found
// in the source file are flagged pretrained; the rest are seeded uniform in
// [-0.25, 0.25]. The PAD row stays zero.
struct EmbeddingTable {
    std::size_t dimension = 0;
    Matrix vectors;                // |V| x D
    std::vector<bool> pretrained;  // per row
    std::string source;

    std::span<const double> row(std::uint32_t index) const {
        return {vectors.row(index), dimension};
    }
};

// Text format: `token v1 v2 ... vD`, one entry per line, no header.
EmbeddingTable load_embedding_table(const std::string& path, const Vocabulary& vocabulary,
                                    std::uint64_t seed);

// u.v / (|u||v|), clamped to [-1, 1]. Empty for a zero vector.
std::optional<double> cosine_similarity(std::span<const double> u, std::span<const double> v);

}  // namespace convmf
