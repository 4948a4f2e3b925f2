#include "convmf/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "convmf/detail/binio.hpp"

namespace convmf {

using detail::read_le;
using detail::read_le_double;
using detail::read_string;
using detail::write_le;
using detail::write_le_double;
using detail::write_string;

namespace {

// --- UTF-8 scanning -------------------------------------------------------

struct Decoded {
    char32_t cp;
    std::size_t len;  // bytes consumed; 0 on invalid input
};

Decoded decode_utf8(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) return {b0, 1};
    auto cont = [&](std::size_t k) {
        return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    };
    auto bits = [&](std::size_t k) { return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F); };
    if ((b0 & 0xE0) == 0xC0 && cont(1)) return {static_cast<char32_t>((b0 & 0x1F) << 6) | bits(1), 2};
    if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2))
        return {static_cast<char32_t>((b0 & 0x0F) << 12) | (bits(1) << 6) | bits(2), 3};
    if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3))
        return {static_cast<char32_t>((b0 & 0x07) << 18) | (bits(1) << 12) | (bits(2) << 6) | bits(3), 4};
    return {0, 0};
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

char32_t to_lower_cp(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;  // Latin-1 uppercase
    return cp;
}

bool is_whitespace_cp(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Punctuation and symbol codepoints act as token separators. ASCII digits
// (and digits inside tokens generally) are kept.
bool is_separator_cp(char32_t cp) {
    if (is_whitespace_cp(cp)) return true;
    if (cp < 0x80) {
        const bool alnum = (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
        return !alnum;  // every other ASCII char, control or printable, separates
    }
    if (cp >= 0xA1 && cp <= 0xBF) {
        switch (cp) {  // Latin-1 letters / numerics embedded in the symbol block
            case 0xAA: case 0xB2: case 0xB3: case 0xB5: case 0xB9: case 0xBA:
                return false;
            default:
                return true;
        }
    }
    if (cp == 0xD7 || cp == 0xF7) return true;
    if (cp >= 0x2000 && cp <= 0x206F) return true;   // general punctuation
    if (cp >= 0x20A0 && cp <= 0x20CF) return true;   // currency signs
    if (cp >= 0x2100 && cp <= 0x214F) return true;   // letterlike symbols
    if (cp >= 0x2190 && cp <= 0x2BFF) return true;   // arrows, math, box drawing, dingbat blocks
    if (cp >= 0x3000 && cp <= 0x303F) return true;   // CJK punctuation
    if (cp >= 0xFE30 && cp <= 0xFE6F) return true;   // vertical/small form punctuation
    if ((cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
        (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65))
        return true;                                 // fullwidth punctuation
    if (cp >= 0x1F000 && cp <= 0x1FAFF) return true; // emoji and friends
    return false;
}

// Standard named entities plus numeric character references. Anything not
// recognized passes through untouched.
std::string unescape_entities(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '&') {
            out.push_back(text[i++]);
            continue;
        }
        const std::size_t semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back(text[i++]);
            continue;
        }
        const std::string_view body = text.substr(i + 1, semi - i - 1);
        char32_t cp = 0;
        bool ok = true;
        if (body == "amp") cp = '&';
        else if (body == "lt") cp = '<';
        else if (body == "gt") cp = '>';
        else if (body == "quot") cp = '"';
        else if (body == "apos") cp = '\'';
        else if (body == "nbsp") cp = 0xA0;
        else if (body.size() > 1 && body[0] == '#') {
            std::string_view digits = body.substr(1);
            int base = 10;
            if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
                base = 16;
                digits = digits.substr(1);
            }
            unsigned long value = 0;
            auto res = std::from_chars(digits.data(), digits.data() + digits.size(), value, base);
            ok = res.ec == std::errc{} && res.ptr == digits.data() + digits.size() && value <= 0x10FFFF;
            cp = static_cast<char32_t>(value);
        } else {
            ok = false;
        }
        if (!ok) {
            out.push_back(text[i++]);
            continue;
        }
        append_utf8(out, cp);
        i = semi + 1;
    }
    return out;
}

std::size_t count_whitespace_words(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (char c : text) {
        const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
        if (ws) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

constexpr char kCorpusMagic[8] = {'C', 'M', 'F', 'C', 'O', 'R', 'P', '1'};

}  // namespace

// --- parsing ---------------------------------------------------------------

ParsedReviews parse_review_records(std::istream& in) {
    ParsedReviews out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            out.errors.push_back({line_number, "malformed JSON"});
            continue;
        }
        RawReview review;
        auto user = doc.find("reviewerID");
        auto item = doc.find("asin");
        auto rating = doc.find("overall");
        if (user == doc.end() || !user->is_string() || user->get<std::string>().empty()) {
            out.errors.push_back({line_number, "missing or empty reviewerID"});
            continue;
        }
        if (item == doc.end() || !item->is_string() || item->get<std::string>().empty()) {
            out.errors.push_back({line_number, "missing or empty asin"});
            continue;
        }
        if (rating == doc.end() || !rating->is_number()) {
            out.errors.push_back({line_number, "missing or non-numeric overall"});
            continue;
        }
        review.rating = rating->get<double>();
        if (!std::isfinite(review.rating) || review.rating < 1.0 || review.rating > 5.0) {
            out.errors.push_back({line_number, "overall outside [1,5]"});
            continue;
        }
        review.user_id = user->get<std::string>();
        review.item_id = item->get<std::string>();
        if (auto text = doc.find("reviewText"); text != doc.end() && text->is_string())
            review.text = text->get<std::string>();
        out.records.push_back(std::move(review));
    }
    if (in.bad()) throw IoError("I/O failure while reading review stream");
    return out;
}

ParsedReviews parse_review_records_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open review file: " + path);
    return parse_review_records(in);
}

StopwordSet load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stopword file: " + path);
    StopwordSet set;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n' || line.back() == ' '))
            line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        // Run entries through the review normalization so contraction forms
        // ("don't") match the pieces the tokenizer actually produces.
        for (auto& token : normalize_and_tokenize(line, {})) set.insert(std::move(token));
    }
    return set;
}

std::vector<std::string> normalize_and_tokenize(std::string_view text, const StopwordSet& stopwords) {
    const std::string unescaped = unescape_entities(text);
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            if (stopwords.find(current) == stopwords.end()) tokens.push_back(current);
            current.clear();
        }
    };
    std::size_t i = 0;
    while (i < unescaped.size()) {
        Decoded d = decode_utf8(unescaped, i);
        if (d.len == 0) {  // invalid byte: acts as a separator
            flush();
            ++i;
            continue;
        }
        const char32_t cp = to_lower_cp(d.cp);
        if (is_separator_cp(cp)) {
            flush();
        } else {
            append_utf8(current, cp);
        }
        i += d.len;
    }
    flush();
    return tokens;
}

// --- vocabulary --------------------------------------------------------------

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& training_token_lists,
                             std::size_t min_count) {
    if (training_token_lists.empty()) throw ConfigError("build_vocabulary: empty training corpus");
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& tokens : training_token_lists)
        for (const auto& token : tokens) ++counts[token];

    std::vector<std::pair<std::string, std::size_t>> kept;
    kept.reserve(counts.size());
    for (auto& [token, count] : counts)
        if (count >= min_count) kept.emplace_back(token, count);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.min_count_ = min_count;
    vocab.tokens_.reserve(kReservedTokens + kept.size());
    for (auto& [token, count] : kept) {
        vocab.index_.emplace(token, static_cast<std::uint32_t>(vocab.tokens_.size()));
        vocab.tokens_.push_back(token);
    }
    return vocab;
}

std::uint32_t Vocabulary::index_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkIndex : it->second;
}

const std::string& Vocabulary::token_of(std::uint32_t index) const {
    if (index >= tokens_.size()) throw ConsistencyError("token index out of range");
    return tokens_[index];
}

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const auto& token : tokens_) {
        h = fnv1a64(token, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary file: " + path);
    for (std::size_t i = kReservedTokens; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
    if (!out) throw IoError("failed writing vocabulary file: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    Vocabulary vocab;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        vocab.index_.emplace(line, static_cast<std::uint32_t>(vocab.tokens_.size()));
        vocab.tokens_.push_back(line);
    }
    return vocab;
}

// --- padding, splitting, statistics ----------------------------------------

PaddedTokens pad_or_truncate(const std::vector<std::uint32_t>& tokens, std::size_t target_len) {
    if (target_len < 1) throw ConfigError("pad_or_truncate: target_len must be >= 1");
    PaddedTokens out;
    out.tokens.assign(target_len, kPadIndex);
    const std::size_t n = std::min(tokens.size(), target_len);
    std::copy_n(tokens.begin(), n, out.tokens.begin());
    out.true_length = static_cast<std::uint32_t>(n);
    return out;
}

std::vector<Split> split_dataset(std::size_t n_records, const SplitRatios& ratios, std::uint64_t seed) {
    if (ratios.train <= 0 || ratios.validation <= 0 || ratios.test <= 0)
        throw ConfigError("split ratios must be positive");
    if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1");

    std::vector<std::size_t> order(n_records);
    for (std::size_t i = 0; i < n_records; ++i) order[i] = i;
    Rng rng(derive_seed(seed, 0x5117));
    rng.shuffle(order);

    const auto n = static_cast<double>(n_records);
    const std::size_t n_train = static_cast<std::size_t>(std::llround(n * ratios.train));
    const std::size_t n_train_val =
        static_cast<std::size_t>(std::llround(n * (ratios.train + ratios.validation)));

    std::vector<Split> assignment(n_records, Split::Train);
    for (std::size_t pos = 0; pos < n_records; ++pos) {
        Split s = pos < n_train ? Split::Train : (pos < n_train_val ? Split::Validation : Split::Test);
        assignment[order[pos]] = s;
    }
    return assignment;
}

CorpusStats corpus_statistics(const std::vector<RawReview>& records) {
    CorpusStats stats;
    std::unordered_set<std::string> users;
    std::unordered_set<std::string> items;
    for (const auto& r : records) {
        users.insert(r.user_id);
        items.insert(r.item_id);
        stats.total_words += count_whitespace_words(r.text);
    }
    stats.n_users = users.size();
    stats.n_items = items.size();
    stats.n_reviews = records.size();
    if (stats.n_items > 0)
        stats.avg_reviews_per_item = static_cast<double>(stats.n_reviews) / static_cast<double>(stats.n_items);
    if (stats.n_reviews > 0)
        stats.avg_words_per_review = static_cast<double>(stats.total_words) / static_cast<double>(stats.n_reviews);
    return stats;
}

std::string stats_to_json(const CorpusStats& stats) {
    nlohmann::json j;
    j["n_users"] = stats.n_users;
    j["n_items"] = stats.n_items;
    j["n_reviews"] = stats.n_reviews;
    j["avg_reviews_per_item"] = stats.avg_reviews_per_item;
    j["total_words"] = stats.total_words;
    j["avg_words_per_review"] = stats.avg_words_per_review;
    return j.dump(2) + "\n";
}

// --- preprocessing pipeline --------------------------------------------------

PreprocessResult preprocess(const std::vector<RawReview>& records, const StopwordSet& stopwords,
                            const PreprocessOptions& options) {
    PreprocessResult result;
    auto& corpus = result.corpus;
    corpus.review_length = static_cast<std::uint32_t>(options.review_length);

    std::unordered_map<std::string, std::uint32_t> user_index;
    std::unordered_map<std::string, std::uint32_t> item_index;
    std::vector<std::uint32_t> users(records.size());
    std::vector<std::uint32_t> items(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto [uit, unew] = user_index.emplace(records[i].user_id,
                                              static_cast<std::uint32_t>(corpus.user_ids.size()));
        if (unew) corpus.user_ids.push_back(records[i].user_id);
        users[i] = uit->second;
        auto [iit, inew] = item_index.emplace(records[i].item_id,
                                              static_cast<std::uint32_t>(corpus.item_ids.size()));
        if (inew) corpus.item_ids.push_back(records[i].item_id);
        items[i] = iit->second;
    }

    const std::vector<Split> splits = split_dataset(records.size(), options.ratios, options.seed);

    std::vector<std::vector<std::string>> token_lists(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        token_lists[i] = normalize_and_tokenize(records[i].text, stopwords);

    std::vector<std::vector<std::string>> train_lists;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (splits[i] == Split::Train) train_lists.push_back(token_lists[i]);
    result.vocabulary = Vocabulary::build(train_lists, options.min_count);
    corpus.vocab_hash = result.vocabulary.hash();

    corpus.records.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::vector<std::uint32_t> ids;
        ids.reserve(token_lists[i].size());
        for (const auto& token : token_lists[i]) ids.push_back(result.vocabulary.index_of(token));
        PaddedTokens padded = pad_or_truncate(ids, options.review_length);
        CorpusRecord record;
        record.review.user_index = users[i];
        record.review.item_index = items[i];
        record.review.rating = records[i].rating;
        record.review.tokens = std::move(padded.tokens);
        record.review.true_length = padded.true_length;
        record.split = splits[i];
        corpus.records.push_back(std::move(record));
    }

    result.stats = corpus_statistics(records);
    return result;
}

// --- corpus container ---------------------------------------------------------

std::vector<std::size_t> TokenizedCorpus::record_ids(Split split) const {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].split == split) ids.push_back(i);
    return ids;
}

std::vector<std::vector<std::size_t>> TokenizedCorpus::train_records_by_item() const {
    std::vector<std::vector<std::size_t>> by_item(item_ids.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].split == Split::Train) by_item[records[i].review.item_index].push_back(i);
    return by_item;
}

double TokenizedCorpus::train_mean_rating() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (r.split == Split::Train) {
            sum += r.review.rating;
            ++n;
        }
    }
    if (n == 0) throw ConfigError("corpus has no training records");
    return sum / static_cast<double>(n);
}

void save_corpus(const TokenizedCorpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write corpus file: " + path);
    out.write(kCorpusMagic, sizeof(kCorpusMagic));
    write_le<std::uint32_t>(out, 1);
    write_le<std::uint32_t>(out, corpus.review_length);
    write_le<std::uint64_t>(out, corpus.vocab_hash);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(corpus.user_ids.size()));
    for (const auto& id : corpus.user_ids) write_string(out, id);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(corpus.item_ids.size()));
    for (const auto& id : corpus.item_ids) write_string(out, id);
    write_le<std::uint64_t>(out, corpus.records.size());
    for (const auto& record : corpus.records) {
        write_le<std::uint32_t>(out, record.review.user_index);
        write_le<std::uint32_t>(out, record.review.item_index);
        write_le_double(out, record.review.rating);
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(record.split));
        write_le<std::uint32_t>(out, record.review.true_length);
        for (std::uint32_t token : record.review.tokens) write_le<std::uint32_t>(out, token);
    }
    if (!out) throw IoError("failed writing corpus file: " + path);
}

TokenizedCorpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCorpusMagic, sizeof(magic)) != 0)
        throw ParseError("not a corpus file: " + path);
    const auto version = read_le<std::uint32_t>(in);
    if (version != 1) throw ParseError("unsupported corpus file version");

    TokenizedCorpus corpus;
    corpus.review_length = read_le<std::uint32_t>(in);
    corpus.vocab_hash = read_le<std::uint64_t>(in);
    const auto n_users = read_le<std::uint32_t>(in);
    corpus.user_ids.reserve(n_users);
    for (std::uint32_t i = 0; i < n_users; ++i) corpus.user_ids.push_back(read_string(in));
    const auto n_items = read_le<std::uint32_t>(in);
    corpus.item_ids.reserve(n_items);
    for (std::uint32_t i = 0; i < n_items; ++i) corpus.item_ids.push_back(read_string(in));
    const auto n_records = read_le<std::uint64_t>(in);
    corpus.records.reserve(n_records);
    for (std::uint64_t i = 0; i < n_records; ++i) {
        CorpusRecord record;
        record.review.user_index = read_le<std::uint32_t>(in);
        record.review.item_index = read_le<std::uint32_t>(in);
        record.review.rating = read_le_double(in);
        record.split = static_cast<Split>(read_le<std::uint8_t>(in));
        record.review.true_length = read_le<std::uint32_t>(in);
        record.review.tokens.resize(corpus.review_length);
        for (auto& token : record.review.tokens) token = read_le<std::uint32_t>(in);
        corpus.records.push_back(std::move(record));
    }
    return corpus;
}

TokenizedCorpus subsample_corpus(const TokenizedCorpus& corpus, std::size_t max_items) {
    std::vector<std::size_t> train_counts(corpus.item_ids.size(), 0);
    for (const auto& record : corpus.records)
        if (record.split == Split::Train) ++train_counts[record.review.item_index];

    std::vector<std::uint32_t> items(corpus.item_ids.size());
    for (std::uint32_t i = 0; i < items.size(); ++i) items[i] = i;
    std::sort(items.begin(), items.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (train_counts[a] != train_counts[b]) return train_counts[a] > train_counts[b];
        return a < b;
    });
    if (items.size() > max_items) items.resize(max_items);
    std::vector<bool> keep(corpus.item_ids.size(), false);
    for (std::uint32_t i : items) keep[i] = true;

    TokenizedCorpus out;
    out.review_length = corpus.review_length;
    out.vocab_hash = corpus.vocab_hash;
    out.user_ids = corpus.user_ids;
    out.item_ids = corpus.item_ids;
    for (const auto& record : corpus.records)
        if (keep[record.review.item_index]) out.records.push_back(record);
    return out;
}

}  // namespace convmf
