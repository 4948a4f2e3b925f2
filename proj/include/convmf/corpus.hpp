#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "convmf/common.hpp"

namespace convmf {

struct RawReview {
    std::string user_id;
    std::string item_id;
    double rating = 0.0;
    std::string text;
};

struct LineError {
    std::size_t line_number = 0;  // 1-based
    std::string message;
};

struct ParsedReviews {
    std::vector<RawReview> records;
    std::vector<LineError> errors;
};

// Reads JSON-lines with fields reviewerID, asin, reviewText, overall.
// Malformed lines are collected, not fatal; a missing reviewText yields an
// empty-text review.
ParsedReviews parse_review_records(std::istream& in);
ParsedReviews parse_review_records_file(const std::string& path);

using StopwordSet = std::unordered_set<std::string>;

StopwordSet load_stopwords(const std::string& path);

// Lowercase, unescape the standard HTML entities, treat punctuation as a
// separator, split on whitespace, drop stopwords. Digits survive.
std::vector<std::string> normalize_and_tokenize(std::string_view text, const StopwordSet& stopwords);

inline constexpr std::uint32_t kPadIndex = 0;
inline constexpr std::uint32_t kUnkIndex = 1;
inline constexpr std::uint32_t kReservedTokens = 2;

class Vocabulary {
public:
    Vocabulary() = default;

    // Tokens with corpus frequency >= min_count, indices assigned from 2 in
    // (frequency desc, token asc) order.
    static Vocabulary build(const std::vector<std::vector<std::string>>& training_token_lists,
                            std::size_t min_count);

    std::uint32_t index_of(const std::string& token) const;  // kUnkIndex if absent
    const std::string& token_of(std::uint32_t index) const;
    bool contains(const std::string& token) const { return index_.count(token) > 0; }

    // Reserved entries included.
    std::size_t size() const { return tokens_.size(); }
    std::size_t min_count() const { return min_count_; }

    // FNV-1a over "token\n" in index order (reserved entries included), so
    // any reordering or edit changes the stamp.
    std::uint64_t hash() const;

    void save(const std::string& path) const;  // one token per line, reserved rows omitted
    static Vocabulary load(const std::string& path);

private:
    std::vector<std::string> tokens_ = {"<pad>", "<unk>"};
    std::unordered_map<std::string, std::uint32_t> index_;
    std::size_t min_count_ = 0;
};

struct TokenizedReview {
    std::uint32_t user_index = 0;
    std::uint32_t item_index = 0;
    double rating = 0.0;
    std::vector<std::uint32_t> tokens;  // length exactly L
    std::uint32_t true_length = 0;
};

struct PaddedTokens {
    std::vector<std::uint32_t> tokens;
    std::uint32_t true_length = 0;
};

PaddedTokens pad_or_truncate(const std::vector<std::uint32_t>& tokens, std::size_t target_len);

enum class Split : std::uint8_t { Train = 0, Validation = 1, Test = 2 };

struct SplitRatios {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
};

// Seeded shuffle then contiguous partition; deterministic for a given seed.
std::vector<Split> split_dataset(std::size_t n_records, const SplitRatios& ratios, std::uint64_t seed);

struct CorpusStats {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::size_t n_reviews = 0;
    double avg_reviews_per_item = 0.0;
    std::size_t total_words = 0;  // whitespace-delimited words of the raw text
    double avg_words_per_review = 0.0;
};

CorpusStats corpus_statistics(const std::vector<RawReview>& records);

std::string stats_to_json(const CorpusStats& stats);

struct CorpusRecord {
    TokenizedReview review;
    Split split = Split::Train;
};

// Tokenized corpus plus the id tables and split assignment produced at
// preprocess time. Indices cover every record; the vocabulary is built from
// the training split only.
struct TokenizedCorpus {
    std::uint32_t review_length = 64;
    std::uint64_t vocab_hash = 0;
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    std::vector<CorpusRecord> records;

    std::size_t n_users() const { return user_ids.size(); }
    std::size_t n_items() const { return item_ids.size(); }

    std::vector<std::size_t> record_ids(Split split) const;
    // item -> its training record ids, in corpus order
    std::vector<std::vector<std::size_t>> train_records_by_item() const;
    double train_mean_rating() const;
};

struct PreprocessOptions {
    std::size_t review_length = 64;
    std::size_t min_count = 5;
    SplitRatios ratios;
    std::uint64_t seed = 0;
};

struct PreprocessResult {
    TokenizedCorpus corpus;
    Vocabulary vocabulary;
    CorpusStats stats;
};

// Full pipeline: split records, build the vocabulary from the training
// split, tokenize everything to fixed length.
PreprocessResult preprocess(const std::vector<RawReview>& records, const StopwordSet& stopwords,
                            const PreprocessOptions& options);

// Versioned binary container (magic, version, L, vocab hash, id tables,
// records). Loading verifies the magic and version.
void save_corpus(const TokenizedCorpus& corpus, const std::string& path);
TokenizedCorpus load_corpus(const std::string& path);

// Keep the records of the top `max_items` items by training-review count
// (ties by item index) and drop the rest; indices are preserved.
TokenizedCorpus subsample_corpus(const TokenizedCorpus& corpus, std::size_t max_items);

}  // namespace convmf
