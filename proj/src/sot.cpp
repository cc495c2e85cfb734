#include "sdctc/sot.hpp"

#include <stdexcept>

namespace sdctc {

SotSequence serialize(const std::vector<Transcript>& transcripts, const Vocabulary& vocab) {
    if (transcripts.empty())
        throw std::invalid_argument("serialize: transcript list is empty");
    SotSequence seq;
    for (size_t i = 0; i < transcripts.size(); ++i) {
        if (transcripts[i].empty())
            throw std::invalid_argument("serialize: empty transcript at position " +
                                        std::to_string(i));
        if (i > 0) seq.tokens.push_back(vocab.sc_id());
        for (int tok : transcripts[i]) {
            if (!vocab.in_vocab(tok))
                throw std::out_of_range("serialize: token outside V");
            seq.tokens.push_back(tok);
        }
    }
    seq.tokens.push_back(vocab.eos_id());
    return seq;
}

std::vector<Transcript> deserialize(const std::vector<int>& seq, const Vocabulary& vocab) {
    std::vector<Transcript> segments(1);
    for (int tok : seq) {
        if (tok == vocab.eos_id()) break;
        if (tok == vocab.sc_id()) {
            segments.emplace_back();
        } else {
            segments.back().push_back(tok);
        }
    }
    return segments;
}

std::string render(const SotSequence& seq, const Vocabulary& vocab) {
    std::string out;
    for (size_t i = 0; i < seq.tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += vocab.name(seq.tokens[i]);
    }
    return out;
}

}  // namespace sdctc
