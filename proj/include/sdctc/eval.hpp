#pragma once

#include <iosfwd>

#include "sdctc/core.hpp"

namespace sdctc {

struct WerCounts {
    long long edits = 0;
    long long ref_len = 0;
};

// Minimal substitutions + insertions + deletions between token sequences.
WerCounts wer(const Transcript& reference, const Transcript& hypothesis);

struct CpwerResult {
    long long edits = 0;
    long long ref_len = 0;
    std::vector<int> permutation;  // hypothesis index assigned to reference i
};

// Minimum-permutation WER: pads the shorter list with empty transcripts,
// then searches all hypothesis-to-reference assignments. Rejects more
// than 8 streams.
CpwerResult cpwer(const std::vector<Transcript>& references,
                  const std::vector<Transcript>& hypotheses);

struct SampleScore {
    std::string sample_id;
    long long edits = 0;
    long long ref_len = 0;
    std::vector<int> permutation;
};

struct ScoreReport {
    std::vector<SampleScore> per_sample;
    long long total_edits = 0;
    long long total_ref_len = 0;

    double aggregate_cpwer() const {
        return total_ref_len > 0 ? static_cast<double>(total_edits) / total_ref_len : 0.0;
    }
    void add(SampleScore score);
};

// Fisher discriminant projection to 2-D. Within-class scatter is
// regularized by eps * I with eps = 1e-6 * trace(Sw) / d.
Matrix lda_projection(const Matrix& frames, const std::vector<int>& labels);

// steps x T attention matrix as CSV; read back bit-identically.
void attention_dump(std::ostream& os, const Matrix& attention);
Matrix read_csv_matrix(std::istream& is);
void write_csv_matrix(std::ostream& os, const Matrix& m);

struct RunComparison {
    std::string label;
    double cpwer = 0.0;
    double relative_reduction = 0.0;  // vs the first (baseline) report
};

// Per-system aggregate cpWER plus relative reduction (base - sys) / base
// against the first report. Reports must cover the same sample ids.
std::vector<RunComparison> compare_runs(const std::vector<ScoreReport>& reports,
                                        const std::vector<std::string>& labels);

}  // namespace sdctc
