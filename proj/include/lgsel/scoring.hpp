#pragma once

#include <cstddef>

#include "lgsel/core_types.hpp"

namespace lgsel {

/// Folds the logits of one candidate's tokens into a single score.
///
/// The effective token list T is the candidate's masked positions when
/// `use_mask` is set, otherwise all of its tokens:
///   first / last / kth(k)  -> logit of T_1 / T_|T| / T_k
///   average / sum          -> mean / sum of logits over T
///   sample_average         -> mean over T at odd 1-based positions (1, 3, 5, ...)
/// Accumulation is 64-bit in token order. kth with k > |T| throws
/// kth_out_of_range; `use_mask` on an unmasked candidate throws missing_mask.
double aggregate(const LogitFrame& frame, const Candidate& candidate, const Method& method,
                 bool use_mask = false);

/// Aggregates every candidate and normalizes with a max-subtracted softmax.
/// Errors from individual candidates are rethrown with the candidate id as subject.
ScoreVector score_pool(const LogitFrame& frame, const CandidatePool& pool, const Method& method,
                       bool use_mask = false);

/// Reference implementation of score_pool: one aggregate() call per candidate
/// and a textbook softmax. Kept deliberately direct for use as a test oracle.
ScoreVector score_pool_naive(const LogitFrame& frame, const CandidatePool& pool, const Method& method,
                             bool use_mask = false);

/// First min(k, |pool|) candidates by descending probability, ties by ascending ordinal.
Ranking top_k(const ScoreVector& scores, const CandidatePool& pool, std::size_t k);

}  // namespace lgsel
