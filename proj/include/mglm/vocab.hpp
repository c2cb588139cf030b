#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mglm/common.hpp"

namespace mglm {

enum class Granularity { fine, coarse };

using TokenizeFn = std::function<std::vector<std::string>(std::string_view)>;

struct VocabEntry {
    std::string token;
    uint64_t freq = 0;
};

// Token <-> id bijection. Ids 0..4 are the fixed special tokens; content
// entries take contiguous ids from 5 in insertion order.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;
    static constexpr int kNumSpecials = 5;

    static const char* special_token(int id);
    static bool is_special_id(int id) { return id >= 0 && id < kNumSpecials; }

    explicit Vocabulary(Granularity g = Granularity::fine);

    Granularity granularity() const { return granularity_; }
    int size() const { return kNumSpecials + static_cast<int>(entries_.size()); }
    const std::vector<VocabEntry>& entries() const { return entries_; }

    // -1 if the token is absent.
    int id_of(std::string_view token) const;
    bool contains(std::string_view token) const { return id_of(token) >= 0; }
    const std::string& token_of(int id) const;
    uint64_t freq_of(int id) const;

    // Appends a content token; id = current size. Duplicate -> DataError.
    int add_token(std::string token, uint64_t freq);

    void save(const std::string& path) const;
    void serialize(std::ostream& os) const;
    static Vocabulary load(const std::string& path, Granularity g);
    static Vocabulary parse(std::istream& is, Granularity g, const std::string& origin);

private:
    Granularity granularity_;
    std::vector<VocabEntry> entries_;
    std::unordered_map<std::string, int> id_of_;
};

// Counts fine tokens over the line stream (NFC-normalized per line) and
// keeps those with frequency >= min_freq, ordered by (freq desc, token asc).
Vocabulary build_vocab(std::istream& corpus, const TokenizeFn& tokenize, uint64_t min_freq,
                       Granularity granularity);
Vocabulary build_vocab_file(const std::string& path, const TokenizeFn& tokenize,
                            uint64_t min_freq, Granularity granularity);

// Coarse-vocabulary builder without an external segmenter: counts the
// concatenations of every run of 1..max_ngram consecutive fine tokens.
Vocabulary build_vocab_ngrams(std::istream& corpus, const TokenizeFn& tokenize, int max_ngram,
                              uint64_t min_freq);

// Coarse-vocabulary builder from the pre-segmented corpus format
// (spans separated by U+241F, in-span token boundaries marked by U+2420).
Vocabulary build_vocab_presegmented(std::istream& corpus, uint64_t min_freq);

// Returns a coarse vocabulary containing every fine token; tokens already
// present keep their ids, missing ones are appended with frequency 0.
Vocabulary ensure_containment(const Vocabulary& fine, const Vocabulary& coarse);
bool containment_holds(const Vocabulary& fine, const Vocabulary& coarse);

}  // namespace mglm
