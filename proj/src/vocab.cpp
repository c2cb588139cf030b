#include "mglm/vocab.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "mglm/unicode.hpp"

namespace mglm {

namespace {

const char* kSpecialTokens[Vocabulary::kNumSpecials] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                                        "[MASK]"};

Vocabulary from_counts(const std::unordered_map<std::string, uint64_t>& counts, uint64_t min_freq,
                       Granularity granularity) {
    std::vector<VocabEntry> kept;
    kept.reserve(counts.size());
    for (const auto& [token, freq] : counts) {
        if (freq >= min_freq) kept.push_back({token, freq});
    }
    std::sort(kept.begin(), kept.end(), [](const VocabEntry& a, const VocabEntry& b) {
        if (a.freq != b.freq) return a.freq > b.freq;
        return a.token < b.token;
    });
    Vocabulary v(granularity);
    for (auto& e : kept) v.add_token(std::move(e.token), e.freq);
    return v;
}

}  // namespace

const char* Vocabulary::special_token(int id) {
    if (!is_special_id(id)) throw ConfigError("special_token: id out of range");
    return kSpecialTokens[id];
}

Vocabulary::Vocabulary(Granularity g) : granularity_(g) {
    for (int i = 0; i < kNumSpecials; ++i) id_of_[kSpecialTokens[i]] = i;
}

int Vocabulary::id_of(std::string_view token) const {
    auto it = id_of_.find(std::string(token));
    return it == id_of_.end() ? -1 : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    static const std::string specials[kNumSpecials] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                                       "[MASK]"};
    if (is_special_id(id)) return specials[id];
    const int idx = id - kNumSpecials;
    if (idx < 0 || idx >= static_cast<int>(entries_.size()))
        throw DataError("token_of: id " + std::to_string(id) + " out of range");
    return entries_[idx].token;
}

uint64_t Vocabulary::freq_of(int id) const {
    if (is_special_id(id)) return 0;
    const int idx = id - kNumSpecials;
    if (idx < 0 || idx >= static_cast<int>(entries_.size()))
        throw DataError("freq_of: id " + std::to_string(id) + " out of range");
    return entries_[idx].freq;
}

int Vocabulary::add_token(std::string token, uint64_t freq) {
    if (token.empty()) throw DataError("add_token: empty token");
    const int id = size();
    auto [it, inserted] = id_of_.emplace(token, id);
    if (!inserted) throw DataError("add_token: duplicate token '" + token + "'");
    entries_.push_back({std::move(token), freq});
    return id;
}

void Vocabulary::serialize(std::ostream& os) const {
    for (const auto& e : entries_) {
        os << e.token << '\t' << e.freq << '\n';
    }
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("save_vocab: cannot open '" + path + "' for writing");
    serialize(f);
    if (!f) throw DataError("save_vocab: write failed for '" + path + "'");
}

Vocabulary Vocabulary::parse(std::istream& is, Granularity g, const std::string& origin) {
    Vocabulary v(g);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            throw DataError(origin + ":" + std::to_string(line_no) + ": empty line");
        }
        const size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw DataError(origin + ":" + std::to_string(line_no) +
                            ": expected 'token<TAB>frequency'");
        }
        std::string token = line.substr(0, tab);
        const std::string_view freq_sv = std::string_view(line).substr(tab + 1);
        uint64_t freq = 0;
        auto [ptr, ec] = std::from_chars(freq_sv.data(), freq_sv.data() + freq_sv.size(), freq);
        if (ec != std::errc{} || ptr != freq_sv.data() + freq_sv.size()) {
            throw DataError(origin + ":" + std::to_string(line_no) + ": bad frequency '" +
                            std::string(freq_sv) + "'");
        }
        if (v.contains(token)) {
            throw DataError(origin + ":" + std::to_string(line_no) + ": duplicate token '" +
                            token + "'");
        }
        v.add_token(std::move(token), freq);
    }
    return v;
}

Vocabulary Vocabulary::load(const std::string& path, Granularity g) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_vocab: cannot open '" + path + "'");
    return parse(f, g, path);
}

Vocabulary build_vocab(std::istream& corpus, const TokenizeFn& tokenize, uint64_t min_freq,
                       Granularity granularity) {
    if (min_freq < 1) throw ConfigError("build_vocab: min_freq must be >= 1");
    if (!corpus) throw DataError("build_vocab: unreadable corpus stream");
    std::unordered_map<std::string, uint64_t> counts;
    std::string line;
    while (std::getline(corpus, line)) {
        for (auto& tok : tokenize(normalize_nfc(line))) {
            ++counts[std::move(tok)];
        }
    }
    if (corpus.bad()) throw DataError("build_vocab: I/O error while reading corpus");
    return from_counts(counts, min_freq, granularity);
}

Vocabulary build_vocab_file(const std::string& path, const TokenizeFn& tokenize,
                            uint64_t min_freq, Granularity granularity) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("build_vocab: cannot open corpus '" + path + "'");
    return build_vocab(f, tokenize, min_freq, granularity);
}

Vocabulary build_vocab_ngrams(std::istream& corpus, const TokenizeFn& tokenize, int max_ngram,
                              uint64_t min_freq) {
    if (min_freq < 1) throw ConfigError("build_vocab_ngrams: min_freq must be >= 1");
    if (max_ngram < 1) throw ConfigError("build_vocab_ngrams: max_ngram must be >= 1");
    if (!corpus) throw DataError("build_vocab_ngrams: unreadable corpus stream");
    std::unordered_map<std::string, uint64_t> counts;
    std::string line;
    while (std::getline(corpus, line)) {
        const std::vector<std::string> toks = tokenize(normalize_nfc(line));
        const int n = static_cast<int>(toks.size());
        for (int i = 0; i < n; ++i) {
            std::string concat;
            for (int len = 1; len <= max_ngram && i + len <= n; ++len) {
                concat += toks[i + len - 1];
                ++counts[concat];
            }
        }
    }
    if (corpus.bad()) throw DataError("build_vocab_ngrams: I/O error while reading corpus");
    return from_counts(counts, min_freq, Granularity::coarse);
}

Vocabulary build_vocab_presegmented(std::istream& corpus, uint64_t min_freq) {
    if (min_freq < 1) throw ConfigError("build_vocab_presegmented: min_freq must be >= 1");
    if (!corpus) throw DataError("build_vocab_presegmented: unreadable corpus stream");
    static const std::string kSpanSep = utf8_encode(static_cast<char32_t>(0x241F));
    static const std::string kTokSep = utf8_encode(static_cast<char32_t>(0x2420));
    std::unordered_map<std::string, uint64_t> counts;
    std::string line;
    while (std::getline(corpus, line)) {
        std::string norm = normalize_nfc(line);
        size_t pos = 0;
        while (pos <= norm.size()) {
            size_t next = norm.find(kSpanSep, pos);
            if (next == std::string::npos) next = norm.size();
            std::string span = norm.substr(pos, next - pos);
            // Drop the in-span boundary markers: the coarse surface is the
            // concatenation of the fine tokens.
            size_t m;
            while ((m = span.find(kTokSep)) != std::string::npos) span.erase(m, kTokSep.size());
            if (!span.empty()) ++counts[span];
            if (next == norm.size()) break;
            pos = next + kSpanSep.size();
        }
    }
    if (corpus.bad()) throw DataError("build_vocab_presegmented: I/O error while reading corpus");
    return from_counts(counts, min_freq, Granularity::coarse);
}

Vocabulary ensure_containment(const Vocabulary& fine, const Vocabulary& coarse) {
    Vocabulary out(Granularity::coarse);
    for (const auto& e : coarse.entries()) out.add_token(e.token, e.freq);
    for (const auto& e : fine.entries()) {
        if (!out.contains(e.token)) out.add_token(e.token, 0);
    }
    return out;
}

bool containment_holds(const Vocabulary& fine, const Vocabulary& coarse) {
    for (const auto& e : fine.entries()) {
        if (!coarse.contains(e.token)) return false;
    }
    return true;
}

}  // namespace mglm
