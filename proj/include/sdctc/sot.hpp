#pragma once

#include "sdctc/core.hpp"

namespace sdctc {

// Serialized multi-speaker token sequence: vocabulary tokens and <sc>
// separators, terminated by a single <eos>.
struct SotSequence {
    std::vector<int> tokens;
};

// Join onset-ordered transcripts with <sc> and append <eos>. Empty
// transcripts (and an empty list) are rejected for targets.
SotSequence serialize(const std::vector<Transcript>& transcripts, const Vocabulary& vocab);

// Split a (possibly malformed) hypothesis on <sc>. Tokens at and after
// <eos> are dropped; empty segments are preserved.
std::vector<Transcript> deserialize(const std::vector<int>& seq, const Vocabulary& vocab);

// Human-readable rendering, segments joined with " <sc> ".
std::string render(const SotSequence& seq, const Vocabulary& vocab);

}  // namespace sdctc
