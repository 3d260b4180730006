#pragma once

#include <string>
#include <utility>
#include <vector>

namespace snet {

using TokenList = std::vector<std::string>;

int lcs_length(const TokenList& a, const TokenList& b);

// LCS F-measure, max over references. F = (1+b^2)PR / (R + b^2 P), 0 when
// P = R = 0. beta follows the common MS-MARCO evaluation convention.
double rouge_l(const TokenList& hypothesis,
               const std::vector<TokenList>& references, double beta = 1.2);

// Corpus-level clipped unigram precision with brevity penalty from corpus
// totals (closest reference length per pair).
double bleu_1_corpus(
    const std::vector<std::pair<TokenList, std::vector<TokenList>>>& pairs);

// Fraction of questions whose argmax score is the correct passage; argmax
// ties break toward the lowest index.
double precision_at_1(
    const std::vector<std::pair<std::vector<double>, int>>& rankings);

struct BucketRow {
  std::string label;
  double fraction = 0.0;
  double mean_rouge = 0.0;
  int count = 0;
};

// Partitions examples by the best-span oracle score into the six buckets
// {max = 1.0, [0.8,1.0), [0.6,0.8), [0.4,0.6), [0.2,0.4), < 0.2} and
// reports the fraction and mean evaluated ROUGE-L of each.
std::vector<BucketRow> bucket_by_upper_bound(
    const std::vector<double>& oracle_scores,
    const std::vector<double>& eval_scores);

struct EvalReport {
  double rouge_l_mean = 0.0;  // mean over questions
  double bleu_1 = 0.0;        // corpus-level
  double p_at_1 = -1.0;       // -1 when ranking scores absent
  std::vector<std::pair<long long, double>> per_question;
  std::vector<BucketRow> bucket_table;
};

std::string format_report_table(const EvalReport& report);

}  // namespace snet
