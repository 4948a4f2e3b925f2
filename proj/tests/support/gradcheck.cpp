#include "gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace convmf::testsupport {

namespace {

Instance try_build(const InstanceSpec& spec, std::uint64_t seed) {
    Instance inst;
    Rng rng(derive_seed(seed, 0x6C));

    const std::size_t vocab_size = 12;
    inst.embeddings.dimension = spec.dim;
    inst.embeddings.source = "synthetic";
    inst.embeddings.vectors = Matrix(vocab_size, spec.dim);
    inst.embeddings.pretrained.assign(vocab_size, true);
    for (std::size_t i = kReservedTokens; i < vocab_size; ++i)
        for (std::size_t d = 0; d < spec.dim; ++d)
            inst.embeddings.vectors(i, d) = rng.uniform(-0.8, 0.8);
    for (std::size_t d = 0; d < spec.dim; ++d) {
        inst.embeddings.vectors(kPadIndex, d) = 0.0;
        inst.embeddings.vectors(kUnkIndex, d) = rng.uniform(-0.8, 0.8);
    }

    inst.corpus.review_length = static_cast<std::uint32_t>(spec.review_length);
    for (std::size_t u = 0; u < spec.n_users; ++u)
        inst.corpus.user_ids.push_back("u" + std::to_string(u));
    for (std::size_t i = 0; i < spec.n_items; ++i)
        inst.corpus.item_ids.push_back("i" + std::to_string(i));
    for (std::size_t item = 0; item < spec.n_items; ++item) {
        for (std::size_t r = 0; r < spec.records_per_item; ++r) {
            CorpusRecord record;
            record.split = Split::Train;
            record.review.item_index = static_cast<std::uint32_t>(item);
            record.review.user_index = static_cast<std::uint32_t>(rng.next_below(spec.n_users));
            record.review.rating = 1.0 + 4.0 * rng.next_double();
            const std::size_t min_len = spec.window + 1;
            record.review.true_length = static_cast<std::uint32_t>(
                min_len + rng.next_below(spec.review_length - min_len + 1));
            record.review.tokens.assign(spec.review_length, kPadIndex);
            for (std::size_t t = 0; t < record.review.true_length; ++t)
                record.review.tokens[t] =
                    static_cast<std::uint32_t>(kReservedTokens + rng.next_below(vocab_size - kReservedTokens));
            inst.corpus.records.push_back(std::move(record));
        }
    }

    inst.params = init_model_params(spec.n_users, spec.n_factors, spec.window, spec.dim,
                                    spec.lambda, derive_seed(seed, 0x9D));
    // Larger-than-default factors keep the loss surface interesting.
    Rng prng(derive_seed(seed, 0xB1));
    for (auto& v : inst.params.user_factors.data()) v = prng.uniform(-0.6, 0.6);
    for (auto& v : inst.params.filters.weights) v = prng.uniform(-0.6, 0.6);
    for (auto& v : inst.params.filters.bias) v = prng.uniform(-0.2, 0.2);
    inst.params.global_mean = 3.0;

    inst.by_item = inst.corpus.train_records_by_item();
    for (std::uint32_t i = 0; i < spec.n_items; ++i) inst.batch.push_back(i);
    inst.options.lambda = spec.lambda;
    inst.options.mask_pad = spec.mask_pad;
    inst.options.embedding_grads = spec.tune_embeddings;
    return inst;
}

// Central differences are invalid near a max-pool tie or at rmse ~ 0; check
// the instance sits away from both.
bool well_conditioned(Instance& inst) {
    for (const auto& record : inst.corpus.records) {
        const ReviewEmbedding emb =
            review_embedding(record.review, inst.embeddings, inst.params.filters);
        for (std::size_t f = 0; f < inst.params.n_factors(); ++f) {
            double best = -1e300, second = -1e300;
            for (std::size_t t = 0; t < emb.map.values.cols(); ++t) {
                const double v = emb.map.values(f, t);
                if (v > best) {
                    second = best;
                    best = v;
                } else if (v > second) {
                    second = v;
                }
            }
            if (best - second < 1e-3) return false;
        }
    }
    const LossBreakdown breakdown = model_batch_loss(
        inst.batch, inst.corpus, inst.by_item, inst.embeddings, inst.params, inst.options, nullptr);
    return breakdown.rmse_term > 1e-2;
}

}  // namespace

Instance build_instance(const InstanceSpec& spec) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        Instance inst = try_build(spec, derive_seed(spec.seed, 0x1000 + attempt));
        if (well_conditioned(inst)) return inst;
    }
    throw std::runtime_error("could not build a well-conditioned gradient-check instance");
}

GradientCheckReport check_instance(Instance& inst, double h) {
    BatchGradients grads;
    model_batch_loss(inst.batch, inst.corpus, inst.by_item, inst.embeddings, inst.params,
                     inst.options, &grads);

    auto loss = [&inst] {
        return model_batch_loss(inst.batch, inst.corpus, inst.by_item, inst.embeddings,
                                inst.params, inst.options, nullptr)
            .total;
    };

    std::vector<ParamBlockView> blocks;
    blocks.push_back({"user_factors", inst.params.user_factors.data(), grads.user_factors.data()});
    blocks.push_back({"filter_weights", inst.params.filters.weights, grads.filters.weights});
    blocks.push_back({"filter_bias", inst.params.filters.bias, grads.filters.bias});
    if (inst.options.embedding_grads) {
        // PAD (row 0) stays frozen, so the checked block starts at row 1.
        const std::size_t D = inst.embeddings.dimension;
        auto& data = inst.embeddings.vectors.data();
        const auto& gdata = grads.embeddings->data();
        blocks.push_back({"embeddings",
                          std::span<double>(data.data() + D, data.size() - D),
                          std::span<const double>(gdata.data() + D, gdata.size() - D)});
    }
    return gradient_check(loss, blocks, h);
}

}  // namespace convmf::testsupport
