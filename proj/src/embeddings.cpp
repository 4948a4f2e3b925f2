#include "convmf/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace convmf {

EmbeddingTable load_embedding_table(const std::string& path, const Vocabulary& vocabulary,
                                    std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file: " + path);

    // First pass over the file collecting vectors for vocabulary tokens only;
    // the dimension is inferred from the first line and enforced after that.
    std::size_t dimension = 0;
    std::vector<std::vector<double>> found(vocabulary.size());
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<double> values;
        double v;
        while (ls >> v) values.push_back(v);
        if (values.empty()) throw ParseError("embedding line " + std::to_string(line_number) + " has no values");
        if (dimension == 0) {
            dimension = values.size();
        } else if (values.size() != dimension) {
            throw ParseError("inconsistent embedding dimension at line " + std::to_string(line_number) +
                             ": expected " + std::to_string(dimension) + ", got " +
                             std::to_string(values.size()));
        }
        if (!vocabulary.contains(token)) continue;
        const std::uint32_t index = vocabulary.index_of(token);
        found[index] = std::move(values);
    }
    if (in.bad()) throw IoError("I/O failure while reading embedding file: " + path);
    if (dimension == 0) throw ParseError("embedding file is empty: " + path);

    EmbeddingTable table;
    table.dimension = dimension;
    table.source = path;
    table.vectors = Matrix(vocabulary.size(), dimension);
    table.pretrained.assign(vocabulary.size(), false);

    Rng rng(derive_seed(seed, 0xE3B));
    for (std::uint32_t i = 0; i < vocabulary.size(); ++i) {
        if (i == kPadIndex) continue;  // stays zero
        if (!found[i].empty()) {
            std::copy(found[i].begin(), found[i].end(), table.vectors.row(i));
            table.pretrained[i] = true;
        } else {
            for (std::size_t d = 0; d < dimension; ++d) table.vectors(i, d) = rng.uniform(-0.25, 0.25);
        }
    }
    return table;
}

std::optional<double> cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw ConfigError("cosine_similarity: dimension mismatch");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return std::nullopt;
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

}  // namespace convmf
