#include "convmf/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "convmf/detail/binio.hpp"

namespace convmf {

using detail::read_le;
using detail::read_le_double;
using detail::read_string;
using detail::write_le;
using detail::write_le_double;
using detail::write_string;

ModelParams init_model_params(std::size_t n_users, std::size_t n_factors, std::size_t window,
                              std::size_t dim, double lambda, std::uint64_t seed) {
    ModelParams params;
    params.user_factors = Matrix(n_users, n_factors);
    params.filters = FilterBank(n_factors, window, dim);
    params.lambda = lambda;

    Rng user_rng(derive_seed(seed, 0x0A11));
    for (auto& v : params.user_factors.data()) v = user_rng.uniform(-0.1, 0.1);
    Rng filter_rng(derive_seed(seed, 0x0F17));
    for (auto& v : params.filters.weights) v = filter_rng.uniform(-0.1, 0.1);
    // biases start at zero
    return params;
}

ReviewEmbedding review_embedding(const TokenizedReview& review, const EmbeddingTable& embeddings,
                                 const FilterBank& filters) {
    ReviewEmbedding out;
    const ReviewMatrix matrix = make_review_matrix(review.tokens, review.true_length, embeddings);
    out.map = conv1d_valid(matrix, filters);
    out.pooled.resize(filters.n_filters);
    out.argmax.resize(filters.n_filters);
    for (std::size_t f = 0; f < filters.n_filters; ++f) {
        const PoolResult pool = max_pool({out.map.values.row(f), out.map.values.cols()});
        out.pooled[f] = pool.value;
        out.argmax[f] = pool.index;
    }
    return out;
}

std::vector<double> item_embedding(std::uint32_t item,
                                   const std::vector<std::vector<std::size_t>>& train_by_item,
                                   const TokenizedCorpus& corpus, const EmbeddingTable& embeddings,
                                   const FilterBank& filters) {
    std::vector<double> acc(filters.n_filters, 0.0);
    const auto& records = train_by_item.at(item);
    if (records.empty()) return acc;  // cold start: zero vector
    for (std::size_t id : records) {
        const ReviewEmbedding emb = review_embedding(corpus.records[id].review, embeddings, filters);
        for (std::size_t f = 0; f < acc.size(); ++f) acc[f] += emb.pooled[f];
    }
    const double inv = 1.0 / static_cast<double>(records.size());
    for (auto& v : acc) v *= inv;
    return acc;
}

ItemEmbeddingCache build_item_cache(const ModelParams& params, const TokenizedCorpus& corpus,
                                    const EmbeddingTable& embeddings) {
    ItemEmbeddingCache cache;
    cache.vectors = Matrix(corpus.n_items(), params.n_factors());
    cache.review_counts.assign(corpus.n_items(), 0);
    cache.params_revision = params.revision;
    const auto by_item = corpus.train_records_by_item();
    for (std::uint32_t item = 0; item < corpus.n_items(); ++item) {
        cache.review_counts[item] = by_item[item].size();
        if (by_item[item].empty()) continue;
        const std::vector<double> v = item_embedding(item, by_item, corpus, embeddings, params.filters);
        std::copy(v.begin(), v.end(), cache.vectors.row(item));
    }
    return cache;
}

double predict_rating(std::uint32_t user, std::uint32_t item, const ModelParams& params,
                      const ItemEmbeddingCache& cache) {
    if (cache.params_revision != params.revision)
        throw ConsistencyError("item embedding cache is stale (params revision " +
                               std::to_string(params.revision) + ", cache " +
                               std::to_string(cache.params_revision) + ")");
    if (item >= cache.vectors.rows()) throw ConsistencyError("item index out of range");
    double dot = 0.0;
    if (user < params.user_factors.rows()) {
        const double* u = params.user_factors.row(user);
        const double* v = cache.vectors.row(item);
        for (std::size_t f = 0; f < params.n_factors(); ++f) dot += u[f] * v[f];
    }
    return params.global_mean + dot;
}

namespace {

// Deterministic without-replacement sample of record ids for a capped item.
std::vector<std::size_t> sample_reviews(const std::vector<std::size_t>& records, std::size_t cap,
                                        std::uint64_t seed, std::uint32_t item) {
    if (cap == 0 || records.size() <= cap) return records;
    std::vector<std::size_t> picked = records;
    Rng rng(derive_seed(seed, 0xCA90000ULL + item));
    rng.shuffle(picked);
    picked.resize(cap);
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace

LossBreakdown model_batch_loss(std::span<const std::uint32_t> batch_items,
                               const TokenizedCorpus& corpus,
                               const std::vector<std::vector<std::size_t>>& train_by_item,
                               const EmbeddingTable& embeddings, const ModelParams& params,
                               const BatchLossOptions& options, BatchGradients* grads) {
    const std::size_t F = params.n_factors();

    struct ItemForward {
        std::uint32_t item;
        std::vector<std::size_t> text_records;
        std::vector<ReviewEmbedding> reviews;
        std::vector<double> embedding;  // F
    };

    std::vector<ItemForward> items;
    std::vector<double> predictions;
    std::vector<double> targets;
    struct RatingRef {
        std::uint32_t user;
        std::size_t item_slot;
    };
    std::vector<RatingRef> rating_refs;
    std::size_t n_reviews = 0;

    for (std::uint32_t item : batch_items) {
        const auto& all_records = train_by_item.at(item);
        if (all_records.empty()) continue;  // no ratings and no reviews to learn from

        ItemForward fwd;
        fwd.item = item;
        fwd.text_records = sample_reviews(all_records, options.max_reviews_per_item,
                                          options.review_sample_seed, item);
        fwd.embedding.assign(F, 0.0);
        for (std::size_t id : fwd.text_records) {
            ReviewEmbedding emb = review_embedding(corpus.records[id].review, embeddings, params.filters);
            for (std::size_t f = 0; f < F; ++f) fwd.embedding[f] += emb.pooled[f];
            fwd.reviews.push_back(std::move(emb));
        }
        const double inv = 1.0 / static_cast<double>(fwd.text_records.size());
        for (auto& v : fwd.embedding) v *= inv;
        n_reviews += fwd.text_records.size();

        const std::size_t slot = items.size();
        for (std::size_t id : all_records) {
            const auto& review = corpus.records[id].review;
            const double* u = params.user_factors.row(review.user_index);
            double dot = 0.0;
            for (std::size_t f = 0; f < F; ++f) dot += u[f] * fwd.embedding[f];
            predictions.push_back(params.global_mean + dot);
            targets.push_back(review.rating);
            rating_refs.push_back({review.user_index, slot});
        }
        items.push_back(std::move(fwd));
    }

    if (predictions.empty()) throw ConfigError("model_batch_loss: batch has no training ratings");

    // The entropy term is always evaluated (RunHistory logs it even for
    // lambda = 0); only its gradient is gated on lambda.
    std::vector<ActivationMap> maps;
    maps.reserve(n_reviews);
    for (const auto& fwd : items)
        for (const auto& emb : fwd.reviews) maps.push_back(emb.map);
    const double reg = entropy_regularizer(maps, options.mask_pad);

    LossBreakdown breakdown = composite_loss(predictions, targets, reg, options.lambda);
    breakdown.n_reviews = n_reviews;
    breakdown.n_factors = F;

    if (!grads) return breakdown;

    grads->user_factors = Matrix(params.user_factors.rows(), F);
    grads->filters = FilterBank(F, params.filters.window, params.filters.dim);
    if (options.embedding_grads)
        grads->embeddings = Matrix(embeddings.vectors.rows(), embeddings.dimension);
    else
        grads->embeddings.reset();

    std::vector<double> d_pred(predictions.size());
    rmse_gradient(predictions, targets, d_pred);

    // Rating path: user factors directly, item embeddings via dv.
    std::vector<std::vector<double>> d_item(items.size(), std::vector<double>(F, 0.0));
    for (std::size_t k = 0; k < rating_refs.size(); ++k) {
        const auto [user, slot] = rating_refs[k];
        double* du = grads->user_factors.row(user);
        const double* v = items[slot].embedding.data();
        const double* u = params.user_factors.row(user);
        for (std::size_t f = 0; f < F; ++f) {
            du[f] += d_pred[k] * v[f];
            d_item[slot][f] += d_pred[k] * u[f];
        }
    }

    const double entropy_scale =
        options.lambda / static_cast<double>(n_reviews * F);  // d loss / d H_row
    std::vector<double> entropy_grad;

    for (std::size_t slot = 0; slot < items.size(); ++slot) {
        const auto& fwd = items[slot];
        const double inv_reviews = 1.0 / static_cast<double>(fwd.text_records.size());
        for (std::size_t r = 0; r < fwd.reviews.size(); ++r) {
            const auto& emb = fwd.reviews[r];
            Matrix d_activations(emb.map.values.rows(), emb.map.values.cols());
            for (std::size_t f = 0; f < F; ++f)
                d_activations(f, emb.argmax[f]) += d_item[slot][f] * inv_reviews;
            if (options.lambda > 0.0) {
                const std::size_t len =
                    options.mask_pad ? emb.map.valid_windows : emb.map.values.cols();
                entropy_grad.assign(len, 0.0);
                for (std::size_t f = 0; f < F; ++f) {
                    entropy_of_activations({emb.map.values.row(f), len}, entropy_grad);
                    double* da = d_activations.row(f);
                    for (std::size_t t = 0; t < len; ++t) da[t] += entropy_scale * entropy_grad[t];
                }
            }

            const auto& review = corpus.records[fwd.text_records[r]].review;
            const ReviewMatrix matrix = make_review_matrix(review.tokens, review.true_length, embeddings);
            if (grads->embeddings) {
                Matrix d_review(matrix.values.rows(), matrix.values.cols());
                conv1d_backward(matrix, params.filters, d_activations, grads->filters, &d_review);
                for (std::size_t t = 0; t < review.tokens.size(); ++t) {
                    const std::uint32_t token = review.tokens[t];
                    if (token == kPadIndex) continue;  // PAD row is frozen
                    double* dst = grads->embeddings->row(token);
                    const double* src = d_review.row(t);
                    for (std::size_t d = 0; d < embeddings.dimension; ++d) dst[d] += src[d];
                }
            } else {
                conv1d_backward(matrix, params.filters, d_activations, grads->filters, nullptr);
            }
        }
    }

    for (double g : grads->filters.weights)
        if (!std::isfinite(g)) throw NumericError("non-finite gradient in filter weights");
    for (double g : grads->filters.bias)
        if (!std::isfinite(g)) throw NumericError("non-finite gradient in filter bias");

    return breakdown;
}

// --- checkpoint container ----------------------------------------------------

namespace {
constexpr char kCheckpointMagic[8] = {'C', 'M', 'F', 'C', 'K', 'P', 'T', '1'};

void write_matrix(std::ostream& out, const Matrix& m) {
    write_le<std::uint64_t>(out, m.rows());
    write_le<std::uint64_t>(out, m.cols());
    for (double v : m.data()) write_le_double(out, v);
}

Matrix read_matrix(std::istream& in) {
    const auto rows = read_le<std::uint64_t>(in);
    const auto cols = read_le<std::uint64_t>(in);
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = read_le_double(in);
    return m;
}
}  // namespace

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Offset: return "offset";
        case ModelKind::Pmf: return "pmf";
        case ModelKind::ConvMf: return "convmf";
    }
    throw ConfigError("unknown model kind");
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "offset") return ModelKind::Offset;
    if (name == "pmf") return ModelKind::Pmf;
    if (name == "convmf") return ModelKind::ConvMf;
    throw ConfigError("unknown model kind: " + name);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_le<std::uint32_t>(out, 1);
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.kind));
    write_le<std::uint64_t>(out, ckpt.vocab_hash);
    write_string(out, ckpt.embedding_source);
    write_string(out, ckpt.config_echo);
    write_le_double(out, ckpt.global_mean);
    write_le_double(out, ckpt.lambda);

    if (ckpt.kind != ModelKind::Offset) write_matrix(out, ckpt.user_factors);
    if (ckpt.kind == ModelKind::ConvMf) {
        write_le<std::uint64_t>(out, ckpt.filters.n_filters);
        write_le<std::uint64_t>(out, ckpt.filters.window);
        write_le<std::uint64_t>(out, ckpt.filters.dim);
        for (double v : ckpt.filters.weights) write_le_double(out, v);
        for (double v : ckpt.filters.bias) write_le_double(out, v);
        write_le<std::uint8_t>(out, ckpt.embeddings.has_value() ? 1 : 0);
        if (ckpt.embeddings) write_matrix(out, *ckpt.embeddings);
    }
    if (ckpt.kind == ModelKind::Pmf) write_matrix(out, ckpt.item_factors);
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw ParseError("not a checkpoint file: " + path);
    if (read_le<std::uint32_t>(in) != 1) throw ParseError("unsupported checkpoint version");

    Checkpoint ckpt;
    ckpt.kind = static_cast<ModelKind>(read_le<std::uint8_t>(in));
    ckpt.vocab_hash = read_le<std::uint64_t>(in);
    ckpt.embedding_source = read_string(in);
    ckpt.config_echo = read_string(in);
    ckpt.global_mean = read_le_double(in);
    ckpt.lambda = read_le_double(in);

    if (ckpt.kind != ModelKind::Offset) ckpt.user_factors = read_matrix(in);
    if (ckpt.kind == ModelKind::ConvMf) {
        const auto f = read_le<std::uint64_t>(in);
        const auto w = read_le<std::uint64_t>(in);
        const auto d = read_le<std::uint64_t>(in);
        ckpt.filters = FilterBank(f, w, d);
        for (auto& v : ckpt.filters.weights) v = read_le_double(in);
        for (auto& v : ckpt.filters.bias) v = read_le_double(in);
        if (read_le<std::uint8_t>(in) != 0) ckpt.embeddings = read_matrix(in);
    }
    if (ckpt.kind == ModelKind::Pmf) ckpt.item_factors = read_matrix(in);
    return ckpt;
}

void verify_checkpoint_corpus(const Checkpoint& ckpt, const TokenizedCorpus& corpus) {
    if (ckpt.vocab_hash != corpus.vocab_hash)
        throw ConsistencyError("vocabulary hash mismatch: checkpoint " + hash_hex(ckpt.vocab_hash) +
                               " vs corpus " + hash_hex(corpus.vocab_hash));
}

}  // namespace convmf
